"""Exception hierarchy shared by every module."""


class SpinodalError(Exception):
    """Base class for all package errors."""


class ShapeError(SpinodalError, ValueError):
    """Truncations or projection indices are incompatible."""


class NumericsError(SpinodalError, ArithmeticError):
    """A non-finite value showed up where a finite one is required."""


class DomainError(SpinodalError, ValueError):
    """Argument outside the mathematical domain of a function."""


class VariantError(SpinodalError, TypeError):
    """Operation not defined for this noise variant."""


class ValidationError(SpinodalError, ValueError):
    """A modelling hypothesis ((A1), (A2), pi^2 > lambda, ...) fails."""


class StabilityError(SpinodalError, ArithmeticError):
    """Implicit denominator of the semi-implicit step is not positive."""


class DivergenceError(SpinodalError, ArithmeticError):
    """A path left the blow-up guard or became non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ScheduleError(SpinodalError, ValueError):
    """The coupling schedule was evaluated outside [0, T)."""


class EstimatorError(SpinodalError, RuntimeError):
    """A Monte-Carlo estimate could not be formed."""


class SamplerWarning(UserWarning):
    """MCMC chain shows poor mixing."""
