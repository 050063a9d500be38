"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all errors raised by mide_lab."""


class InvalidInputError(LabError, ValueError):
    """A precondition of an operation was violated.

    The message names the violated constraint.
    """


class ConfigError(LabError, ValueError):
    """An experiment config or coefficient expression could not be used."""


class QuadratureError(LabError):
    """Estimated quadrature error exceeded the requested tolerance."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(message)
        self.value = value
        self.error = error


class DivergentConvolutionError(LabError):
    """The supremum defining a sup-convolution is +inf."""


class DivergenceError(LabError):
    """Pseudo-time marching stopped without reaching the residual tolerance."""

    def __init__(self, message: str, history: list[tuple[int, float, float]]):
        super().__init__(message)
        self.history = history


class InstabilityError(LabError):
    """Time marching blew up."""


class UnfitTableError(LabError, ValueError):
    """A modulus table has no usable points for a log-log fit."""
