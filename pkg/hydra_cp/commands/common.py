"""
Hydra-CP - Shared Command Arguments

Flags every subcommand accepts and the helpers that turn them into a
validated scenario, a method and an output directory.
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from hydra_cp.config import settings
from hydra_cp.core.exceptions import ConfigValidationError
from hydra_cp.core.scenario_loader import LoadedScenario, load_scenario
from hydra_cp.models.config import FusionMethod

DEFAULT_METHOD = FusionMethod.HYDRA
TIMING_COLUMNS = ["method", "key", "value", "agents", "frame", "seconds"]


def add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scenario",
        type=Path,
        default=None,
        help="Scenario YAML file (or a manifest.echo); built-in defaults when omitted",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a dotted config key; repeatable, applied in order",
    )
    parser.add_argument("--seed", type=int, default=None, help="Replace scenario.seed")


def add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"Output directory (default: $HYDRA_OUTPUT_ROOT/<command>, "
        f"currently {settings.output_root})",
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=settings.default_jobs,
        help="Worker processes sharing the frames",
    )


def load_from_args(
    args: argparse.Namespace,
    extra_overrides: Sequence[str] = (),
    seed: Optional[int] = None,
) -> LoadedScenario:
    """Scenario file + --set overrides (+ extra overrides) + seed."""
    return load_scenario(
        args.scenario,
        [*args.overrides, *extra_overrides],
        seed=args.seed if seed is None else seed,
    )


def parse_method(name: str) -> FusionMethod:
    try:
        return FusionMethod.parse(name)
    except ValueError as e:
        choices = ", ".join(m.value for m in FusionMethod)
        raise ConfigValidationError(f"--method: {e} (choose from {choices})")


def resolve_method(name: Optional[str], loaded: LoadedScenario) -> FusionMethod:
    """--method wins over the manifest's method, which wins over hydra."""
    if name is not None:
        return parse_method(name)
    if loaded.method is not None:
        return parse_method(str(loaded.method))
    return DEFAULT_METHOD


def output_dir(args: argparse.Namespace, command: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    return settings.output_root_path / command


def check_jobs(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        raise ConfigValidationError(f"--jobs: must be >= 1, got {args.jobs}")
    return int(args.jobs)


def timing_rows(
    method: str,
    frame_seconds: Sequence[float],
    agents: int,
    key: str = "",
    value: Any = "",
) -> List[Dict[str, Any]]:
    """Per-frame wall-clock rows for timing.csv."""
    return [
        {
            "method": method,
            "key": key,
            "value": value,
            "agents": agents,
            "frame": frame,
            "seconds": f"{seconds:.6f}",
        }
        for frame, seconds in enumerate(frame_seconds)
    ]
