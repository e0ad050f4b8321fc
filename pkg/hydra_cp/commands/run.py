"""
Hydra-CP - `run` Command

Runs one method over every frame of a scenario and writes report.json,
report.csv, manifest.echo and the timing.csv sidecar.
"""

from __future__ import annotations

import argparse
from typing import Any

from loguru import logger

from hydra_cp.commands.common import (
    TIMING_COLUMNS,
    add_output_arguments,
    add_scenario_arguments,
    check_jobs,
    load_from_args,
    output_dir,
    resolve_method,
    timing_rows,
)
from hydra_cp.core.exceptions import EXIT_OK
from hydra_cp.core.scenario_loader import manifest_echo
from hydra_cp.services.experiment_service import ExperimentService
from hydra_cp.services.report_service import (
    MANIFEST_ECHO,
    REPORT_CSV,
    REPORT_JSON,
    TIMING_CSV,
    report_csv,
    report_json,
    staged_output,
    to_csv,
)


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser("run", help="Run one fusion method over a scenario")
    add_scenario_arguments(parser)
    add_output_arguments(parser)
    parser.add_argument(
        "--method",
        default=None,
        help="Fusion method (default: the manifest's method, else hydra)",
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    jobs = check_jobs(args)
    loaded = load_from_args(args)
    method = resolve_method(args.method, loaded)
    out = output_dir(args, "run")

    scenario = loaded.config.scenario
    logger.info(
        f"🚀 Running {method.value} on '{scenario.name}' "
        f"({scenario.n_frames} frames, seed {scenario.seed})"
    )
    result = ExperimentService(jobs).run_method(loaded.config, method)
    agents = len(scenario.agent_specs)

    with staged_output(out) as staged:
        staged.write(REPORT_JSON, report_json(result.report))
        staged.write(REPORT_CSV, report_csv(result.report))
        staged.write(MANIFEST_ECHO, manifest_echo(loaded, method.value))
        staged.write(
            TIMING_CSV,
            to_csv(
                TIMING_COLUMNS, timing_rows(method.value, result.frame_seconds, agents)
            ),
        )

    for key, value in result.report.ap.total.items():
        logger.info(f"📊 {method.value} total AP@{key} = {value:.4f}")
    print(out)
    return EXIT_OK
