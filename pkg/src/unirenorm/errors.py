"""Exception and warning types shared across the package."""


class RenormError(Exception):
    """Base class for all package errors."""


class SectorError(RenormError):
    """A complex argument lies outside the requested sector of q_t."""


class DegenerateIntervalError(RenormError):
    pass


class MonotonicityError(RenormError):
    """A map is not strictly monotone on the interval it is zoomed on."""


class RangeError(RenormError):
    """An inner map leaves the domain of the outer map."""


class NonFiniteError(RenormError):
    pass


class NoCycleError(RenormError):
    """The pair has no admissible cycle with the requested combinatorics."""


class NumericError(RenormError):
    """A root finder or iterative solver did not converge."""


class NewtonDivergence(NumericError):
    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class NestingError(RenormError):
    """Cycles of consecutive depths are not nested."""


class SchemaError(RenormError):
    """A persisted record document is malformed."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class PrecisionWarning(UserWarning):
    """Interpolation residual above the configured threshold."""
