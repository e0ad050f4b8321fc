"""
Hydra-CP - `sweep` Command

Runs the selected methods at every value of one dotted config key. Each
point lands in points/<value>/<method>/ with its own replayable
manifest.echo; sweep.csv holds every (method, value, class, threshold) row.
"""

from __future__ import annotations

import argparse
from typing import Any, Dict, List, Sequence

import yaml
from loguru import logger

from hydra_cp.commands.common import (
    TIMING_COLUMNS,
    add_output_arguments,
    add_scenario_arguments,
    check_jobs,
    load_from_args,
    output_dir,
    parse_method,
    timing_rows,
)
from hydra_cp.core.exceptions import EXIT_OK, ConfigValidationError
from hydra_cp.core.scenario_loader import LoadedScenario, manifest_echo
from hydra_cp.models.config import FusionMethod
from hydra_cp.services.experiment_service import (
    SWEEP_DEFAULT_METHODS,
    ExperimentService,
    SweepPoint,
)
from hydra_cp.services.report_service import (
    MANIFEST_ECHO,
    REPORT_COLUMNS,
    REPORT_CSV,
    REPORT_JSON,
    SWEEP_CSV,
    TIMING_CSV,
    StagedOutput,
    ap_rows,
    report_csv,
    report_json,
    staged_output,
    to_csv,
)

SWEEP_COLUMNS = ["key", "value", *REPORT_COLUMNS]


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "sweep", help="Run methods over values of one config key"
    )
    add_scenario_arguments(parser)
    add_output_arguments(parser)
    parser.add_argument(
        "--key", required=True, help="Dotted config key, e.g. scenario.pose_noise_sigma"
    )
    parser.add_argument(
        "--values", nargs="*", default=[], help="Values to sweep (YAML scalars)"
    )
    parser.add_argument(
        "--method",
        dest="methods",
        action="append",
        default=None,
        help="Method to include; repeatable (default: no_fusion, late_only, "
        "intermediate_only, hydra)",
    )
    parser.set_defaults(handler=handle)


def parse_values(raw: Sequence[str]) -> List[Any]:
    values = []
    for text in raw:
        try:
            values.append(yaml.safe_load(text))
        except yaml.YAMLError as e:
            raise ConfigValidationError(f"--values {text}: not a YAML scalar: {e}")
    return values


def point_dir(value: Any) -> str:
    return str(value).replace("/", "_")


def handle(args: argparse.Namespace) -> int:
    jobs = check_jobs(args)
    values = parse_values(args.values)
    methods: Sequence[FusionMethod] = SWEEP_DEFAULT_METHODS
    if args.methods:
        methods = [parse_method(m) for m in args.methods]
    loaded = load_from_args(args)
    out = output_dir(args, "sweep")

    def rebuild(extra: Sequence[str], seed: int) -> LoadedScenario:
        return load_from_args(args, extra_overrides=extra, seed=seed)

    logger.info(f"🚀 Sweeping {args.key} over {values} with {len(methods)} methods")
    points = ExperimentService(jobs).sweep(loaded, args.key, values, methods, rebuild)

    with staged_output(out) as staged:
        combined: List[Dict[str, Any]] = []
        timing: List[Dict[str, Any]] = []
        for point in points:
            _write_point(staged, point, loaded.config.scenario.seed)
            agents = len(point.loaded.config.scenario.agent_specs)
            for method, run in point.runs.items():
                combined.extend(
                    {
                        "key": point.key,
                        "value": point.value,
                        "method": method.value,
                        "sigma": run.report.pose_noise_sigma,
                        **row,
                    }
                    for row in ap_rows(run.report.ap)
                )
                timing.extend(
                    timing_rows(
                        method.value, run.frame_seconds, agents, point.key, point.value
                    )
                )
        staged.write(SWEEP_CSV, to_csv(SWEEP_COLUMNS, combined))
        staged.write(TIMING_CSV, to_csv(TIMING_COLUMNS, timing))

    print(out)
    return EXIT_OK


def _write_point(staged: StagedOutput, point: SweepPoint, master_seed: int) -> None:
    sweep_info = {
        "sweep": {"key": point.key, "value": point.value, "master_seed": master_seed}
    }
    for method, run in point.runs.items():
        base = f"points/{point_dir(point.value)}/{method.value}"
        staged.write(f"{base}/{REPORT_JSON}", report_json(run.report))
        staged.write(f"{base}/{REPORT_CSV}", report_csv(run.report))
        staged.write(
            f"{base}/{MANIFEST_ECHO}",
            manifest_echo(point.loaded, method.value, extra=sweep_info),
        )
