"""Settings configuration for the de Sitter Klein-Gordon toolkit.

This module provides centralized process-level configuration using Pydantic
BaseSettings: environment variable loading, validation, and default value
handling. Experiment parameters live in the JSON configuration handled by
``desitter_kg.src.schema``; only knobs that belong to the host (thread caps,
cache sizes, log level) are read from the environment.
"""

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings

from desitter_kg.src.core.exceptions.exceptions import AppException, AppExceptionCode
from desitter_kg.utils.pylogger import get_python_logger

# Initialize logger
logger = get_python_logger()

# Load environment variables with error handling
try:
    load_dotenv()
except Exception as e:
    # Log error but don't fail - environment variables might be set directly
    logger.warning(f"Could not load .env file: {e}")


class Settings(BaseSettings):
    """Configuration settings for the toolkit.

    The settings are organized into logical groups:
    - Logging: log level for structlog
    - Parallelism: thread cap shared by every parallel map and FFT
    - Numerics: hypergeometric term budget, propagator cache size
    - Output: default directory for experiment artifacts
    """

    # Logging
    PYTHON_LOG_LEVEL: str = Field(
        default="INFO", json_schema_extra={"env": "PYTHON_LOG_LEVEL"}
    )

    # Parallelism
    DSKG_THREADS: int = Field(default=1, json_schema_extra={"env": "DSKG_THREADS"})

    # Numerics
    DSKG_HYP2F1_TERM_BUDGET: int = Field(
        default=4000, json_schema_extra={"env": "DSKG_HYP2F1_TERM_BUDGET"}
    )
    DSKG_CACHE_MB: int = Field(default=512, json_schema_extra={"env": "DSKG_CACHE_MB"})

    # Output
    DSKG_OUTPUT_DIR: str = Field(
        default="results", json_schema_extra={"env": "DSKG_OUTPUT_DIR"}
    )


# name -> (lower bound, phrase used in the error)
_LOWER_BOUNDS: dict[str, tuple[int, str]] = {
    "DSKG_THREADS": (1, "at least 1"),
    "DSKG_HYP2F1_TERM_BUDGET": (100, "at least 100"),
    "DSKG_CACHE_MB": (0, "non-negative"),
}

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _reject(detail: str) -> None:
    logger.error("invalid settings", detail=detail)
    raise AppException(detail, AppExceptionCode.CONFIGURATION_VALIDATION_ERROR)


def validate_config(settings: Settings) -> None:
    """Validate configuration settings.

    Args:
        settings: Settings instance to validate.

    Raises:
        AppException: If a value is outside its accepted range.
    """
    for name, (lower, phrase) in _LOWER_BOUNDS.items():
        value = getattr(settings, name)
        if value < lower:
            _reject(f"{name} must be {phrase}, got {value}")

    if settings.PYTHON_LOG_LEVEL.upper() not in VALID_LOG_LEVELS:
        _reject(f"PYTHON_LOG_LEVEL must be one of {list(VALID_LOG_LEVELS)}, got {settings.PYTHON_LOG_LEVEL}")


# Create settings instance without validation (validation happens in main.py)
settings = Settings()
