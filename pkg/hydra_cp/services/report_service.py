"""
Hydra-CP - Report Service

Serializes run results: a JSON tree for machines, flat CSV tables for
plotting and the manifest echo for replay. Output directories are staged in a
temporary sibling and moved into place only when every file has been written,
so a failed command never leaves partial reports behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Sequence

from loguru import logger

from hydra_cp.core.exceptions import ReportError
from hydra_cp.models.results import ApReport, RunReport

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
MANIFEST_ECHO = "manifest.echo"
TIMING_CSV = "timing.csv"
SWEEP_CSV = "sweep.csv"
ABLATION_CSV = "ablation.csv"
SCORES_CSV = "scores.csv"
SCORES_JSON = "scores.json"

REPORT_COLUMNS = ["method", "class", "threshold", "sigma", "ap", "tp", "fp", "fn"]
TOTAL_CLASS = "total"


def to_json(payload: Any) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def to_csv(columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n"
    )
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def ap_rows(ap: ApReport) -> List[Dict[str, Any]]:
    """One row per (class, threshold), followed by the class-mean rows."""
    rows: List[Dict[str, Any]] = []
    for label, class_ap in ap.per_class.items():
        for key, value in class_ap.ap.items():
            counts = class_ap.counts[key]
            rows.append(
                {
                    "class": label,
                    "threshold": key,
                    "ap": value,
                    "tp": counts.tp,
                    "fp": counts.fp,
                    "fn": counts.fn,
                }
            )
    for key, value in ap.total.items():
        rows.append(
            {
                "class": TOTAL_CLASS,
                "threshold": key,
                "ap": value,
                "tp": sum(c.counts[key].tp for c in ap.per_class.values()),
                "fp": sum(c.counts[key].fp for c in ap.per_class.values()),
                "fn": sum(c.counts[key].fn for c in ap.per_class.values()),
            }
        )
    return rows


def report_csv(report: RunReport) -> str:
    rows = [
        {"method": report.method, "sigma": report.pose_noise_sigma, **row}
        for row in ap_rows(report.ap)
    ]
    return to_csv(REPORT_COLUMNS, rows)


def report_json(report: RunReport) -> str:
    return to_json(report.model_dump(mode="json"))


class StagedOutput:
    """Collects files for one output directory before they are committed."""

    def __init__(self, staging: Path):
        self.staging = staging
        self.files: List[str] = []

    def write(self, relative: str, text: str) -> Path:
        path = self.staging / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.files.append(relative)
        return path


@contextmanager
def staged_output(out_dir: Path) -> Iterator[StagedOutput]:
    """
    Stage files next to `out_dir` and move them in once the block succeeds.

    Existing files of the same name are replaced; other files in `out_dir`
    are left alone.

    Raises:
        ReportError: If the staging area or the final files cannot be written
    """
    out_dir = Path(out_dir)
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    except OSError as e:
        raise ReportError(f"Cannot create output directory {out_dir}: {e}")

    try:
        staged = StagedOutput(staging)
        yield staged
        _commit(staging, out_dir, staged.files)
        logger.info(f"💾 Wrote {len(staged.files)} files to {out_dir}")
    except OSError as e:
        raise ReportError(
            f"Cannot write reports to {out_dir}: {e}", details={"out": str(out_dir)}
        )
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _commit(staging: Path, out_dir: Path, files: Sequence[str]) -> None:
    if not out_dir.exists():
        os.replace(staging, out_dir)
        return
    for relative in files:
        target = out_dir / relative
        target.parent.mkdir(parents=True, exist_ok=True)
        os.replace(staging / relative, target)
