"""Error hierarchy shared by the lab services and management commands.

Each class carries the process exit code the management commands use when
the error escapes a command.
"""


class LabError(Exception):
    """Base class for every failure raised by the lab."""

    exit_code = 1


class InvalidInputError(LabError, ValueError):
    """Malformed, inconsistent or out-of-range input."""

    exit_code = 2


class InsufficientDataError(InvalidInputError):
    """Too few data points for the requested fit."""


class UnidentifiableFitError(InvalidInputError):
    """The data carry no information about the fitted parameter."""


class ResourceLimitError(LabError):
    """A configured enumeration or state-vector cap would be exceeded."""

    exit_code = 3


class ConvergenceError(LabError):
    """An iterative solver ran out of budget before reaching its tolerance."""

    exit_code = 4

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class GenerationError(LabError):
    """The problem generator exhausted its attempt budget."""

    exit_code = 5
