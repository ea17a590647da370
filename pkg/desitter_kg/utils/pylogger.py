"""Structured logger for the de Sitter Klein-Gordon toolkit.

Records are JSON lines on stderr; stdout is reserved for command output.
Python warnings (numpy overflow near blow-up, scipy integration warnings) are
captured into the same stream.
"""

import logging
import sys

import structlog

# joblib worker pools log every dispatch at DEBUG
QUIET_LOGGERS = frozenset({"joblib", "loky", "concurrent.futures"})

# overflow and integration warnings are frequent during blow-up runs
WARNING_LOGGERS = frozenset({"py.warnings", "numexpr", "numexpr.utils"})

_LOGGING_CONFIGURED = False


def _clamp_library_loggers(level: str) -> None:
    for name in QUIET_LOGGERS | WARNING_LOGGERS:
        library_logger = logging.getLogger(name)
        library_logger.handlers.clear()
        library_logger.propagate = True
        if name in WARNING_LOGGERS:
            library_logger.setLevel(max(logging.WARNING, logging.getLevelName(level)))
        else:
            library_logger.setLevel(logging.WARNING)


def get_python_logger(log_level: str = "INFO") -> structlog.BoundLogger:
    """Return the shared structlog logger, configuring it on first use."""
    global _LOGGING_CONFIGURED
    log_level = log_level.upper()

    if not _LOGGING_CONFIGURED:
        logging.basicConfig(format="%(message)s", stream=sys.stderr, level=log_level)
        logging.captureWarnings(True)
        structlog.configure(
            processors=[
                structlog.stdlib.filter_by_level,
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.processors.TimeStamper(fmt="iso"),
                structlog.processors.format_exc_info,
                structlog.processors.JSONRenderer(),
            ],
            context_class=dict,
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=True,
        )
        _clamp_library_loggers(log_level)
        _LOGGING_CONFIGURED = True

    return structlog.get_logger()
