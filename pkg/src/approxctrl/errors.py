"""Exception hierarchy shared by the library and the CLI."""


class ApproxCtrlError(Exception):
    """Base class for all package errors."""


class ShapeError(ApproxCtrlError, ValueError):
    """Array dimensions do not match the model."""


class ConfigError(ApproxCtrlError, ValueError):
    """Invalid model or run configuration."""


class NumericalError(ApproxCtrlError, ArithmeticError):
    """A computation produced non-finite values or a factorization failed."""


class ConvergenceError(NumericalError):
    """Fixed-point iteration hit ``max_iter`` without reaching ``tol``."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(NumericalError):
    """Iterate left the guard ball."""

    def __init__(self, message, radius=None, iterations=None):
        super().__init__(message)
        self.radius = radius
        self.iterations = iterations
