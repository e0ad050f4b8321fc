"""
Hydra-CP - `ablate` Command

{domain classifier off/on} x {pose graph off/on} at 0.4 m pose noise, one
row per combination with total AP at every evaluated threshold.
"""

from __future__ import annotations

import argparse
from typing import Any, Dict, List

from loguru import logger

from hydra_cp.commands.common import (
    add_output_arguments,
    add_scenario_arguments,
    check_jobs,
    load_from_args,
    output_dir,
)
from hydra_cp.core.exceptions import EXIT_OK
from hydra_cp.core.scenario_loader import manifest_echo
from hydra_cp.models.results import threshold_key
from hydra_cp.services.experiment_service import ABLATION_SIGMA, ExperimentService
from hydra_cp.services.report_service import (
    ABLATION_CSV,
    MANIFEST_ECHO,
    staged_output,
    to_csv,
)


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "ablate", help="Classifier x pose-graph ablation grid under pose noise"
    )
    add_scenario_arguments(parser)
    add_output_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    jobs = check_jobs(args)
    loaded = load_from_args(args)
    out = output_dir(args, "ablate")
    keys = [threshold_key(t) for t in loaded.config.eval.iou_thresholds]

    scenario = loaded.config.scenario.name
    logger.info(f"🚀 Ablation grid on '{scenario}' at sigma={ABLATION_SIGMA}")
    rows: List[Dict[str, Any]] = []
    for row in ExperimentService(jobs).ablate(loaded.config):
        rows.append(
            {
                "classifier": int(row.classifier),
                "pgo": int(row.pgo),
                "method": row.method.value,
                "sigma": ABLATION_SIGMA,
                **{f"ap@{key}": row.ap.total[key] for key in keys},
            }
        )

    columns = ["classifier", "pgo", "method", "sigma", *(f"ap@{key}" for key in keys)]
    with staged_output(out) as staged:
        staged.write(ABLATION_CSV, to_csv(columns, rows))
        staged.write(
            MANIFEST_ECHO,
            manifest_echo(
                loaded, None, extra={"command": "ablate", "sigma": ABLATION_SIGMA}
            ),
        )
    print(out)
    return EXIT_OK
