"""Exception types shared across the package."""


class KinCrowdError(Exception):
    """Base class for all package errors."""


class ConfigError(KinCrowdError, ValueError):
    """A scenario, request or geometry failed validation.

    ``field`` names the offending config key when one is known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(KinCrowdError, ValueError):
    """A geometric query was made outside the bounding box."""


class NumericStateError(KinCrowdError, ArithmeticError):
    """The discrete state left its admissible range during a run."""

    def __init__(self, message, step=None, cell=None):
        self.step = step
        self.cell = cell
        super().__init__(message)
