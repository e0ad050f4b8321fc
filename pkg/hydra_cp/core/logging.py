"""
Hydra-CP - Logging Configuration

This module configures logging for Hydra-CP using Loguru.
Logs go to stderr (and optionally a rotating file) so that stdout stays
reserved for machine-readable command output.
"""

import logging
import sys
from typing import Any, Dict, Optional

from loguru import logger

from hydra_cp.config import settings


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configure process logging using Loguru.

    - Development: colored stderr output at DEBUG level
    - Production: plain stderr at INFO + serialized JSON file sink

    Args:
        level: Optional level overriding the configured one (e.g. from --verbose)
    """
    logger.remove()

    console_format = (
        "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
        "<level>{message}</level>"
    )

    file_format = (
        "{time:YYYY-MM-DD HH:mm:ss} | "
        "{level: <8} | "
        "{name}:{function}:{line} | "
        "{message}"
    )

    console_level = level or ("DEBUG" if settings.debug else settings.log_level)

    if settings.is_development:
        logger.add(
            sys.stderr,
            format=console_format,
            level=console_level,
            colorize=True,
            backtrace=settings.debug,
            diagnose=settings.debug,
        )
    else:
        logger.add(
            sys.stderr,
            format=console_format,
            level=console_level,
            colorize=False,
            backtrace=False,
            diagnose=False,
        )

    if settings.log_to_file:
        settings.ensure_log_directory()
        logger.add(
            settings.log_file,
            format=file_format,
            level=settings.log_level,
            rotation=settings.log_max_size,
            retention=settings.log_backup_count,
            compression="zip",
            serialize=settings.is_production,
            backtrace=False,
            diagnose=False,
        )

    configure_external_loggers()

    logger.debug(f"🔧 Logging configured for {settings.environment} environment")


def configure_external_loggers() -> None:
    """Redirect standard-library logging records into Loguru."""

    class InterceptHandler(logging.Handler):
        def emit(self, record: logging.LogRecord) -> None:
            try:
                level: Any = logger.level(record.levelname).name
            except ValueError:
                level = record.levelno

            frame, depth = logging.currentframe(), 2
            while frame is not None and frame.f_code.co_filename == logging.__file__:
                frame = frame.f_back  # type: ignore[assignment]
                depth += 1

            logger.opt(depth=depth, exception=record.exc_info).log(
                level, record.getMessage()
            )

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)


def log_performance(operation: str, duration: float, **context: Any) -> None:
    """
    Log performance metrics.

    Args:
        operation: Name of the operation
        duration: Duration in seconds
        **context: Additional context information
    """
    logger.bind(operation=operation, duration=duration, **context).info(
        f"⏱️ {operation} completed in {duration:.3f}s"
    )


def log_error(error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
    """
    Log errors with context.

    Args:
        error: Exception that occurred
        context: Additional context information
    """
    context = context or {}
    logger.bind(error_type=type(error).__name__, **context).error(
        f"❌ Error: {error}"
    )
