"""
Console helpers: logging setup and progress bars for batch commands.
"""

import logging
import sys
from typing import Iterable, Optional, TypeVar

from tqdm import tqdm

from modules.config import DEFAULT_LOG_LEVEL, LOG_FORMAT

T = TypeVar("T")


def configure_logging(level: str = DEFAULT_LOG_LEVEL) -> None:
    """Install a single stderr handler on the root logger."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT, stream=sys.stderr, force=True)


def progress(iterable: Iterable[T], total: Optional[int] = None, desc: str = "",
             enabled: bool = True) -> Iterable[T]:
    """Wrap an iterable in a tqdm bar written to stderr; a no-op when disabled."""
    return tqdm(iterable, total=total, desc=desc, disable=not enabled, file=sys.stderr, leave=False)
