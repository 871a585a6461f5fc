"""Exception hierarchy shared by every module of the package."""


class TailRatioError(Exception):
    """Base class for all errors raised by :mod:`tailratio`."""


class NotFound(TailRatioError, LookupError):
    """Unknown family name or preset."""


class DomainError(TailRatioError, ValueError):
    """An argument lies outside the admissible region (parameter, support, probability)."""


class DegenerateStep(DomainError):
    """The local step ``t(k, u)`` is zero or undefined."""


class NumericalError(TailRatioError, ArithmeticError):
    """Quadrature or root finding failed to reach the requested accuracy.

    Attributes:
        error_estimate: the achieved error estimate, when one is available.
    """

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConfigError(TailRatioError, ValueError):
    """Invalid experiment design or run configuration."""
