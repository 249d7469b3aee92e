"""
Console output for the command line.

All diagnostics go to stderr through a rich Console so that stdout stays
clean for command results. Library modules only use `logging`; this module
wires those loggers to a RichHandler and draws the banner blocks.
"""

import logging
import os
import time
from contextlib import contextmanager
from typing import Iterable, Iterator, Optional, Tuple

from rich.console import Console
from rich.logging import RichHandler

RULE_WIDTH = 70

console = Console(stderr=True, highlight=False)


def setup_logging(level: Optional[str] = None) -> None:
    """
    Route every `gaitauth` logger to a RichHandler on stderr.

    Args:
        level: logging level name; falls back to GAIT_LOG_LEVEL, then INFO
    """
    level_name = (level or os.getenv('GAIT_LOG_LEVEL', 'INFO')).upper()

    handler = RichHandler(
        console=console,
        show_time=False,
        show_path=False,
        markup=False,
        rich_tracebacks=True,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))

    root = logging.getLogger("gaitauth")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))
    root.propagate = False


def banner(title: str, rows: Iterable[Tuple[str, object]] = ()) -> None:
    """Print a ruled block with a title and `key: value` rows."""
    console.print("\n" + "=" * RULE_WIDTH)
    console.print(title)
    console.print("=" * RULE_WIDTH)
    for key, value in rows:
        console.print(f"{key}: {value}")
    console.print("=" * RULE_WIDTH + "\n")


def status(message: str) -> None:
    console.print(message)


@contextmanager
def step(label: str) -> Iterator[None]:
    """Time a block and report it as `⏱️  label: 12.3ms`."""
    start = time.perf_counter()
    yield
    elapsed = (time.perf_counter() - start) * 1000
    console.print(f"   ⏱️  {label}: {elapsed:.1f}ms")
