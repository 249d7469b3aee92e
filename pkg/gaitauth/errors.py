"""
Exception hierarchy shared by the pipeline and the command line.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""

from typing import Optional


class GaitError(Exception):
    """Base class for every error raised on purpose by gaitauth."""


class ConfigError(GaitError):
    """Invalid configuration value or command-line usage."""


class DataError(GaitError, ValueError):
    """Input data cannot be processed."""


class ParseError(DataError):
    """Malformed sensor log."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.reason = message
        self.line = line
        self.source = source
        if line is not None:
            message = f"line {line}: {message}"
        if source:
            message = f"{source}: {message}"
        super().__init__(message)


class SignalError(DataError):
    """Signal too short, without energy, aperiodic or without a complete cycle."""


class ModelError(DataError):
    """Model cannot be fitted, applied or loaded."""
