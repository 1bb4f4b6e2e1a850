"""Logging configuration for the solver and its service surface.

Provides structured logging with:
- Console output for all levels
- File output for persistent logs
- Request/response tracing for the HTTP surface
- Custom DIAG level for numerical diagnostics (conservation defects,
  negativity, stability flags, certified rank errors)
"""

import logging
import sys
from datetime import datetime
from pathlib import Path

from config import settings

# Create logs directory if it doesn't exist
log_dir = Path(settings.log_dir)
log_dir.mkdir(parents=True, exist_ok=True)

# Define custom DIAG log level (between INFO=20 and WARNING=30)
DIAG_LEVEL = 25
logging.addLevelName(DIAG_LEVEL, "DIAG")


def diag(self, message, *args, **kwargs):
    """Log a message with DIAG level."""
    if self.isEnabledFor(DIAG_LEVEL):
        self._log(DIAG_LEVEL, message, args, **kwargs)


# Add diag method to Logger class
logging.Logger.diag = diag

# Define log format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)


def _daily_file_handler(prefix: str, level: int) -> logging.FileHandler:
    """``<log_dir>/<prefix>_YYYYMMDD.log`` at ``level`` and above."""
    handler = logging.FileHandler(log_dir / f"{prefix}_{datetime.now().strftime('%Y%m%d')}.log")
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


# Console: LOG_LEVEL and above (INFO by default, so DIAG lines show)
console_handler = logging.StreamHandler(sys.stdout)
console_handler.setLevel(logging.getLevelName(settings.log_level.upper()))
console_handler.setFormatter(formatter)

file_handler = _daily_file_handler("solver", logging.DEBUG)
error_handler = _daily_file_handler("errors", logging.ERROR)

# Numerical diagnostics only: conservation defects, rank errors, blowups
diag_handler = _daily_file_handler("diagnostics", DIAG_LEVEL)
diag_handler.addFilter(lambda record: record.levelno == DIAG_LEVEL)

HANDLERS = (console_handler, file_handler, error_handler, diag_handler)


def get_logger(name: str) -> logging.Logger:
    """Get a configured logger instance.

    Args:
        name: Logger name (usually __name__ of the module)

    Returns:
        logging.Logger: Configured logger instance with diag() method
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)

    # Prevent propagation to avoid duplicate logs
    logger.propagate = False

    # Re-imports must not stack handlers
    logger.handlers.clear()
    for handler in HANDLERS:
        logger.addHandler(handler)

    return logger
