"""Exception hierarchy shared by the library and the CLI."""
from __future__ import annotations


class OldregError(Exception):
    """Base class of all errors raised by this package."""


class ValidationError(OldregError):
    """Invalid configuration or parameters."""


class ScenarioParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NumericalError(OldregError):
    """Non-finite state, stalled time step or failed linear solve."""


class ProjectionError(NumericalError):
    pass
