"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage problems exit 2, domain and
theorem violations exit 3, Monte Carlo data problems exit 4.
"""

from __future__ import annotations


class HeavyTailsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HeavyTailsError, ValueError):
    """An argument lies outside the set where the quantity is defined."""


class InfiniteMomentError(DomainError):
    """The requested moment is infinite (``p >= alpha``)."""


class HypothesisError(DomainError):
    """A hypothesis of a bound (e.g. ``alpha > 2``) is not satisfied."""


class InvariantViolation(HeavyTailsError):
    """A structural invariant of an object was found to be broken."""


class ProfileError(HeavyTailsError, ValueError):
    """An epsilon profile violates its cap or growth conditions."""


class ConstructionError(HeavyTailsError):
    """A constructed tail fails to be a valid survival function."""


class QuadratureError(HeavyTailsError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, partial: float | None = None):
        super().__init__(message)
        self.partial = partial


class PreconditionError(HeavyTailsError):
    """A checked precondition (e.g. log-convexity on a grid) failed."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class TheoremViolation(HeavyTailsError):
    """A numerically measured quantity contradicts a proven inequality."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class DataError(HeavyTailsError):
    """Monte Carlo output is insufficient for the requested statistic."""


class DescriptorError(HeavyTailsError, ValueError):
    """A JSON distribution, profile or tensor descriptor is malformed."""
