"""
Logging setup for BubbleFed
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None, serialize: bool = False):
    """
    Configure loguru sinks

    Args:
        log_level: Minimum level for every sink
        log_file: Optional path of a rotating file sink
        serialize: Emit JSON records instead of formatted text
    """
    logger.remove()
    logger.add(sys.stderr, level=log_level, format=LOG_FORMAT, serialize=serialize)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, level=log_level, rotation="10 MB", retention=5, serialize=serialize,
                   enqueue=False)

    logger.debug(f"Logging configured at level {log_level}")
