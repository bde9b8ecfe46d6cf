"""
Logging setup for socheck.

All package loggers hang below the "socheck" logger. Handlers write to
stderr so the JSON reports printed on stdout stay parseable, and Python
warnings (numpy overflow and invalid-value warnings from the difference
quotients) are routed into the same handlers.
"""

import logging
import sys
from pathlib import Path
from typing import Optional

PACKAGE_LOGGER = "socheck"

COMPACT_FORMAT = "%(levelname)-7s %(name)s: %(message)s"
DEBUG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s (%(filename)s:%(lineno)d): %(message)s"


def _handler(handler: logging.Handler, level: int, formatter: logging.Formatter) -> logging.Handler:
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(
    level: int = logging.INFO,
    log_file: Optional[Path] = None,
    debug: bool = False,
    quiet: bool = False,
) -> logging.Logger:
    """
    Configure the package logger and return it.

    Args:
        level: Base level (INFO)
        log_file: Also log to this file (always at DEBUG)
        debug: DEBUG level with file/line information
        quiet: Only warnings and errors on the console; ignored with debug
    """
    if debug:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    formatter = logging.Formatter(DEBUG_FORMAT if debug else COMPACT_FORMAT, datefmt="%H:%M:%S")

    package = logging.getLogger(PACKAGE_LOGGER)
    package.handlers.clear()
    handlers = [_handler(logging.StreamHandler(sys.stderr), level, formatter)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(_handler(logging.FileHandler(log_file, encoding="utf-8"), logging.DEBUG, formatter))
    package.setLevel(logging.DEBUG if log_file else level)

    logging.captureWarnings(True)
    py_warnings = logging.getLogger("py.warnings")
    py_warnings.handlers.clear()
    for handler in handlers:
        package.addHandler(handler)
        py_warnings.addHandler(handler)

    package.debug(f"logging at {logging.getLevelName(level)}" + (f", file {log_file}" if log_file else ""))
    return package


def get_logger(name: str) -> logging.Logger:
    """Logger below the package logger; bare names are prefixed with "socheck."."""
    if name == PACKAGE_LOGGER or name.startswith(PACKAGE_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")
