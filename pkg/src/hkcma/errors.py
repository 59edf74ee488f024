"""Exception types shared across the package."""


class HKError(Exception):
    """Base class for all package errors."""


class RangeError(HKError, OverflowError):
    """An exponent's real part is too large to evaluate in double precision."""


class DomainError(HKError, ValueError):
    """Input lies outside the domain where a quantity is defined."""


class SingularInputError(HKError, ZeroDivisionError):
    """A denominator vanishes (or is numerically indistinguishable from zero)."""


class NearLocusError(DomainError):
    """Point is on or too close to the singular locus c^2 - |a|^2 = 0."""

    def __init__(self, message, locus_value=None):
        super().__init__(message)
        self.locus_value = locus_value


class OrientationError(HKError):
    """Neither orientation makes the Kaehler triple self-dual."""
