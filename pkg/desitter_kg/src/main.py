"""Main entry point for the ``dskg`` command line.

This module provides the console-script entry point, including settings
validation, dispatch to the typer application, and the mapping of startup
failures to process exit codes.
"""

import sys
from typing import NoReturn

from desitter_kg.src.app import app
from desitter_kg.src.core.exceptions.exceptions import (
    EXIT_INTERNAL,
    AppException,
    AppExceptionCode,
)
from desitter_kg.src.settings import settings
from desitter_kg.src.settings import validate_config as validate_config_func
from desitter_kg.utils.pylogger import get_python_logger

# Initialize logger
logger = get_python_logger(settings.PYTHON_LOG_LEVEL)


def validate_and_initialize_config() -> None:
    """Validate process settings before any experiment runs.

    Raises:
        AppException: If the settings object is missing attributes or a
            value is outside its accepted range.
    """
    try:
        validate_config_func(settings)
        logger.debug(
            "Configuration validation passed",
            threads=settings.DSKG_THREADS,
            cache_mb=settings.DSKG_CACHE_MB,
        )

    except AttributeError:
        raise AppException(
            "Failed to properly initialize configurations",
            AppExceptionCode.CONFIGURATION_INITIALIZATION_ERROR,
        )
    except AppException:
        raise
    except Exception:
        raise AppException(
            "Configuration validation failed",
            AppExceptionCode.CONFIGURATION_VALIDATION_ERROR,
        )


def handle_startup_error(error: BaseException, context: str = "command startup") -> NoReturn:
    """Log an error and exit with the code of its failure class.

    Args:
        error: The exception that occurred.
        context: Where the error occurred, for the log line.

    Raises:
        SystemExit: Always; application errors carry their own exit code,
            anything else exits with 1.
    """
    if isinstance(error, AppException):
        logger.critical(
            f"{error.message} during {context}: {error.detail_message}",
            error_code=error.error_code,
        )
        sys.exit(error.exit_code)
    elif isinstance(error, KeyboardInterrupt):
        logger.info("Interrupted by user")
        sys.exit(0)
    elif isinstance(error, PermissionError):
        logger.critical(f"Permission error during {context}: {error}")
        sys.exit(EXIT_INTERNAL)
    else:
        logger.critical(f"Unexpected error during {context}: {error}", exc_info=True)
        sys.exit(EXIT_INTERNAL)


def main() -> None:
    """Console-script entry point.

    Validates settings and hands the command line to the typer
    application, which exits with the status of the experiment.

    Raises:
        SystemExit: With the experiment status, or the exit code of the
            failure class when startup fails.
    """
    try:
        validate_and_initialize_config()
        app()

    except KeyboardInterrupt:
        logger.info("Received keyboard interrupt, shutting down")
    except Exception as e:
        handle_startup_error(e, "command execution")


def run() -> None:
    """Run the command line with a last-resort error guard.

    Raises:
        SystemExit: If the command fails in a way main() did not handle.
    """
    try:
        main()
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(0)
    except Exception as e:
        # This should rarely be reached due to handle_startup_error
        logger.error("Command failed", error=str(e), exc_info=True)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    run()
