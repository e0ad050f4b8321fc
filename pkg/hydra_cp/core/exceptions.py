"""
Hydra-CP - Custom Exceptions

This module defines custom exceptions for Hydra-CP.
All exceptions inherit from HydraError so the command-line front end can map
them to exit codes consistently.
"""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class HydraError(Exception):
    """
    Base exception class for Hydra-CP.

    All custom exceptions should inherit from this class to ensure
    consistent error handling, logging and exit codes.
    """

    def __init__(
        self,
        message: str,
        error_code: str = "HYDRA_ERROR",
        exit_code: int = EXIT_RUNTIME,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.error_code = error_code
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigValidationError(HydraError):
    """Raised when a scenario file or override fails validation."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="CONFIG_VALIDATION_ERROR",
            exit_code=EXIT_CONFIG,
            details=details,
        )


class ScenarioError(HydraError):
    """Raised when a scenario file is missing or cannot be parsed."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="SCENARIO_ERROR",
            exit_code=EXIT_CONFIG,
            details=details,
        )


class FrameTagError(HydraError):
    """Raised when a detection set is used in the wrong coordinate frame."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="FRAME_TAG_ERROR",
            exit_code=EXIT_RUNTIME,
            details=details,
        )


class RoutingError(HydraError):
    """Raised when an agent's data crosses into the wrong fusion branch."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="ROUTING_ERROR",
            exit_code=EXIT_RUNTIME,
            details=details,
        )


class OptimizationError(HydraError):
    """Raised when a pose graph is malformed."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="OPTIMIZATION_ERROR",
            exit_code=EXIT_RUNTIME,
            details=details,
        )


class ReportError(HydraError):
    """Raised when run reports cannot be written."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            error_code="REPORT_ERROR",
            exit_code=EXIT_RUNTIME,
            details=details,
        )
