"""
Logging configuration for isospec
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from config import LOGGING_CONFIG


def setup_logging(
    name: str = "isospec",
    level: Optional[str] = None,
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Set up logging with a console handler and an optional rotating file handler

    Console output goes to stderr so reports written to stdout stay parseable.

    Args:
        name: Logger name
        level: Log level name (default from config)
        log_file: Log file path (default from config; None disables file logging)

    Returns:
        Configured logger instance
    """
    level = level or LOGGING_CONFIG["level"]
    log_file = log_file or LOGGING_CONFIG["log_file"]

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # Remove existing handlers to avoid duplicates
    logger.handlers.clear()
    logger.propagate = False

    formatter = logging.Formatter(LOGGING_CONFIG["format"])

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logger.level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = RotatingFileHandler(
            Path(log_file),
            maxBytes=LOGGING_CONFIG["max_bytes"],
            backupCount=LOGGING_CONFIG["backup_count"],
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str = "isospec") -> logging.Logger:
    """
    Get a logger in the isospec hierarchy

    Module loggers ("isospec.spectrum", ...) propagate to the "isospec" root,
    which is configured on first use.

    Args:
        name: Module name (usually __name__)

    Returns:
        Logger instance
    """
    root = logging.getLogger("isospec")
    if not root.handlers:
        setup_logging("isospec")

    if name == "isospec" or name.startswith("isospec."):
        return logging.getLogger(name)
    return logging.getLogger(f"isospec.{name}")
