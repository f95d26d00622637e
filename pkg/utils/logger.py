"""
Logging setup shared by the CLI, the controller and the protocol modules.

One application logger ("ReferendumLedger") writes to stderr and to two
files under <app data dir>/logs; its child "ReferendumLedger.trace" carries
the per-tick action trace and never reaches those handlers.
"""

import logging
import os
import sys
import traceback
from datetime import datetime
from typing import Optional

from utils.config import LOGGER_NAME, ensure_directory, get_app_data_dir

_logger: Optional[logging.Logger] = None

CONSOLE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"


def _file_handlers(name: str, log_dir: str) -> list:
    formatter = logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    daily = logging.FileHandler(os.path.join(log_dir, f"{name}_{datetime.now():%Y%m%d}.log"), encoding="utf-8")
    daily.setLevel(logging.DEBUG)
    errors = logging.FileHandler(os.path.join(log_dir, f"{name}_errors.log"), encoding="utf-8")
    errors.setLevel(logging.ERROR)
    for handler in (daily, errors):
        handler.setFormatter(formatter)
    return [daily, errors]


def setup_logger(name: str = LOGGER_NAME, level: int = logging.INFO,
                 log_dir: Optional[str] = None, to_files: bool = True) -> logging.Logger:
    """
    Configure the application logger once per process.

    Args:
        name: Logger name
        level: Console level; the daily file always records DEBUG
        log_dir: Directory for log files (default: <app data dir>/logs)
        to_files: Disable to keep logging on the console only

    Returns:
        Configured logger instance
    """
    global _logger

    # Already configured
    if _logger is not None and _logger.handlers:
        return _logger

    logger = logging.getLogger(name)
    # The logger passes everything; handlers filter
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    # stderr, so stdout carries only the report
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))
    logger.addHandler(console)

    # Daily DEBUG log plus an errors-only log
    if to_files:
        try:
            target = ensure_directory(log_dir or os.path.join(get_app_data_dir(), "logs"))
            for handler in _file_handlers(name, target):
                logger.addHandler(handler)
        except OSError as e:
            logger.warning(f"File logging disabled, console only: {e}")

    _logger = logger
    return logger


def get_logger() -> logging.Logger:
    """Application logger; unconfigured (handler-less) when used as a library."""
    global _logger

    if _logger is None:
        _logger = logging.getLogger(LOGGER_NAME)
    return _logger


def get_trace_logger() -> logging.Logger:
    """Child logger carrying the per-tick action trace."""
    return logging.getLogger(f"{LOGGER_NAME}.trace")


def log_exception(logger: logging.Logger, message: str = "An error occurred"):
    """Log the exception being handled, traceback included."""
    logger.error(f"{message}: {traceback.format_exc()}")


def log_system_info(logger: logging.Logger):
    """Host details for --verbose runs."""
    import platform
    import psutil

    try:
        memory = psutil.virtual_memory()
        logger.info(f"Host: {platform.platform()}, Python {platform.python_version()}")
        logger.info(f"CPUs: {psutil.cpu_count()}, memory {memory.total // (1024**3)} GB "
                    f"({memory.available // (1024**3)} GB free)")
    except Exception as e:
        logger.warning(f"Failed to log system info: {e}")


def set_log_level(level: int):
    """Change the console level; file handlers keep their own levels."""
    for handler in get_logger().handlers:
        if not isinstance(handler, logging.FileHandler):
            handler.setLevel(level)
