"""
Hydra-CP - Command-Line Entry Point

Builds the argument parser from the command modules, configures logging and
maps errors to exit codes: 0 success, 2 invalid configuration, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from typing import Optional, Sequence

from loguru import logger

from hydra_cp.commands import ablate, run, scores, sweep, validate
from hydra_cp.config import settings
from hydra_cp.core.exceptions import EXIT_RUNTIME, HydraError
from hydra_cp.core.logging import log_error, setup_logging

COMMANDS = (run, sweep, ablate, scores, validate)


def build_parser() -> argparse.ArgumentParser:
    """
    Create the top-level parser with one subparser per command module.

    Returns:
        argparse.ArgumentParser: Parser whose namespaces carry a `handler`
    """
    parser = argparse.ArgumentParser(
        prog="hydra-cp", description=settings.app_description
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {settings.app_version}"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log per-frame detail (DEBUG)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)

    try:
        return int(args.handler(args))
    except HydraError as e:
        log_error(e, {"command": args.command, "error_code": e.error_code})
        return e.exit_code
    except Exception as e:
        log_error(e, {"command": args.command})
        if settings.debug:
            logger.error(f"Traceback: {traceback.format_exc()}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
