"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command-line driver
can translate failures without a lookup table.
"""

from __future__ import annotations


class GmstError(Exception):
    exit_code = 5


class ConfigurationError(GmstError, ValueError):
    """Invalid parameters or an unsupported combination of options."""

    exit_code = 1


class InputError(GmstError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 2


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class DegenerateInputError(InputError):
    pass


class DisconnectedGraphError(GmstError):
    exit_code = 3


class IllPosedSlopeError(GmstError):
    """Fitted log-log slope >= 1: the dimension estimate diverges."""

    exit_code = 4


class DegenerateSlopeError(GmstError):
    """Fitted log-log slope <= 0: lengths do not grow with sample size."""

    exit_code = 4
