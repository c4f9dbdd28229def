"""Exception types raised across the package."""


class GuaranteePIError(Exception):
    """Base class for all package errors."""


class DataError(GuaranteePIError, ValueError):
    """Malformed or inconsistent input data."""


class DimensionMismatch(DataError):
    pass


class NumericError(GuaranteePIError, ArithmeticError):
    """A numerical precondition failed (rank, leverage, positivity)."""


class RankDeficient(NumericError):
    pass


class LeverageOne(NumericError):
    pass


class NonPositiveU(NumericError):
    pass


class AlphaOutOfRange(GuaranteePIError, ValueError):
    pass
