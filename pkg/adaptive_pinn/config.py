"""
Configuration settings for the adaptive PINN toolkit.
"""

import os
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings, overridable through ``ADAPTIVE_PINN_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="ADAPTIVE_PINN_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Randomness
    SEED: int = 0

    # Output
    OUTPUT_DIR: str = "./runs"
    PRESETS_FILE: str = str(Path(__file__).resolve().parent.parent / "config" / "presets.json")

    # Data
    DEFAULT_TARGET_COLUMN: str = "nu"
    SOURCE_POINTS: int = 400
    TARGET_POINTS: int = 87

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = "./logs/adaptive_pinn.log"

    # Processing
    MAX_WORKERS: int = 1

    # Training defaults
    LEARNING_RATE: float = 1e-3
    MAX_EPOCHS: int = 5000
    EARLY_STOP_PATIENCE: int = 200
    VAL_FRACTION: float = 0.2

    # Robustness study
    MC_TRIALS: int = 100


# Global settings instance
settings = Settings()


def ensure_directories(*extra: str):
    """Ensure the output and log directories exist."""
    directories = [settings.OUTPUT_DIR, *extra]
    if settings.LOG_FILE:
        directories.append(os.path.dirname(settings.LOG_FILE) or ".")

    for directory in directories:
        Path(directory).mkdir(parents=True, exist_ok=True)
