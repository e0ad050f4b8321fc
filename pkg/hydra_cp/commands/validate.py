"""
Hydra-CP - `validate` Command

Checks a scenario and its overrides without running anything. On success the
fully resolved manifest is printed to stdout.
"""

from __future__ import annotations

import argparse
from typing import Any

from loguru import logger

from hydra_cp.commands.common import (
    add_scenario_arguments,
    load_from_args,
    resolve_method,
)
from hydra_cp.core.exceptions import EXIT_OK
from hydra_cp.core.scenario_loader import manifest_echo


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "validate", help="Validate a scenario and print it resolved"
    )
    add_scenario_arguments(parser)
    parser.add_argument("--method", default=None, help="Method to check and echo")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    loaded = load_from_args(args)
    method = resolve_method(args.method, loaded)
    logger.info(f"✅ {loaded.source} is valid")
    print(manifest_echo(loaded, method.value), end="")
    return EXIT_OK
