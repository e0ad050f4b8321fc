"""
Hydra-CP - `scores` Command

Domain score statistics per agent kind without and with pose noise, plus the
gap between the lowest homogeneous and the highest heterogeneous score.
"""

from __future__ import annotations

import argparse
from typing import Any

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
from hydra_cp.services.experiment_service import ExperimentService
from hydra_cp.services.report_service import (
    MANIFEST_ECHO,
    SCORES_CSV,
    SCORES_JSON,
    staged_output,
    to_csv,
    to_json,
)

SCORE_COLUMNS = ["noise", "kind", "mean", "max", "min", "std", "samples"]


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "scores", help="Domain score statistics per agent kind"
    )
    add_scenario_arguments(parser)
    add_output_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    jobs = check_jobs(args)
    loaded = load_from_args(args)
    out = output_dir(args, "scores")

    table = ExperimentService(jobs).scores(loaded.config)
    if not table.rows:
        logger.warning("⚠️ No auxiliary agents or frames; score table is empty")
    for label, margin in table.margins.items():
        if margin is not None:
            logger.info(
                f"📊 {label}: homogeneous min - heterogeneous max = {margin:.4f}"
            )

    rows = [stats.model_dump() for stats in table.rows]
    with staged_output(out) as staged:
        staged.write(SCORES_CSV, to_csv(SCORE_COLUMNS, rows))
        staged.write(SCORES_JSON, to_json({"rows": rows, "margins": table.margins}))
        staged.write(
            MANIFEST_ECHO, manifest_echo(loaded, None, extra={"command": "scores"})
        )
    print(out)
    return EXIT_OK
