"""Exception types raised by the library."""


class HslraError(Exception):
    """Base class for all library errors."""


class ArgumentError(HslraError, ValueError):
    """Invalid argument: bad shape, out-of-range rank, non-SPD weight, ..."""


class NumericalError(HslraError, ArithmeticError):
    """A numerical kernel failed (e.g. SVD did not converge)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankMismatchError(HslraError, ValueError):
    """The data does not have the numerical rank the caller asserted."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class NonContinuableError(HslraError, ValueError):
    """The recurrence has a vanishing leading coefficient and cannot extrapolate."""


class DegenerateError(HslraError, ValueError):
    """A quantity needed for a division vanished (e.g. zero approximant)."""
