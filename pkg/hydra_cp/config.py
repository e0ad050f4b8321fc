"""
Hydra-CP - Process Configuration

This module handles process-level settings: environment, logging and the
default locations used by the command-line front end. Experiment parameters
(scenario, classifier, pose graph, fusion) live in scenario files and are
modelled in hydra_cp.models.config.
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # =============================================================================
    # Application Info
    # =============================================================================
    app_name: str = "Hydra-CP"
    app_version: str = "1.0.0"
    app_description: str = (
        "Domain-aware hybrid collaborative perception simulator"
    )

    # =============================================================================
    # Environment
    # =============================================================================
    environment: str = Field(default="development", alias="ENVIRONMENT")
    debug: bool = Field(default=False, alias="DEBUG")

    # =============================================================================
    # Logging
    # =============================================================================
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    log_file: str = Field(default="logs/hydra_cp.log", alias="LOG_FILE")
    log_max_size: str = Field(default="10 MB", alias="LOG_MAX_SIZE")
    log_backup_count: int = Field(default=5, alias="LOG_BACKUP_COUNT")
    log_to_file: bool = Field(default=False, alias="LOG_TO_FILE")

    # =============================================================================
    # Runs
    # =============================================================================
    output_root: str = Field(default="runs", alias="HYDRA_OUTPUT_ROOT")
    default_jobs: int = Field(default=1, ge=1, alias="HYDRA_JOBS")

    def ensure_log_directory(self) -> None:
        """Create the log directory when file logging is enabled."""
        if self.log_to_file:
            Path(self.log_file).parent.mkdir(parents=True, exist_ok=True)

    @property
    def output_root_path(self) -> Path:
        """Default root directory for run outputs."""
        return Path(self.output_root)

    @property
    def is_production(self) -> bool:
        """Check if running in production environment."""
        return self.environment.lower() == "production"

    @property
    def is_development(self) -> bool:
        """Check if running in development environment."""
        return self.environment.lower() == "development"


# Global settings instance
settings = Settings()
