"""Exception and warning types raised across the package."""


class NSMCError(Exception):
    """Base class for all package errors."""


class DomainError(NSMCError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnboundedBodyError(DomainError):
    """No outside point was found before the bracket cap."""


class RecentreError(NSMCError):
    """The reference point could not be kept inside the body."""


class IntegrandEvaluationError(NSMCError, FloatingPointError):
    """The integrand returned a non-finite value at a quadrature node."""


class ConfigError(NSMCError, ValueError):
    """An experiment or body specification is malformed."""


class UnsupportedDensityError(NSMCError, NotImplementedError):
    """No closed form or numeric fallback exists for the requested quantity."""


class IllConditionedWarning(RuntimeWarning):
    """Signed summands cancel so strongly that the mean is unreliable."""
