"""Exception hierarchy for carleman_qr."""


class CarlemanQRError(Exception):
    """Base class for all package errors."""


class GridError(CarlemanQRError, ValueError):
    """Invalid grid construction or a grid too small for an operation."""


class FieldError(CarlemanQRError, ValueError):
    """Field with the wrong shape or non-finite values."""


class WeightDomainError(CarlemanQRError, ValueError):
    """A node lies within unit distance of the Carleman pole ``x0``."""


class CoefficientError(CarlemanQRError, ValueError):
    """Diffusion matrix that is not symmetric positive definite."""


class ParameterError(CarlemanQRError, ValueError):
    """Out-of-range numerical parameter."""


class EvaluationError(CarlemanQRError, ArithmeticError):
    """Non-finite value produced by a nonlinearity or data function."""


class LinearSolverError(CarlemanQRError, RuntimeError):
    """Least-squares solve failed.

    Attributes
    ----------
    residual : float
        Relative normal-equations residual achieved before giving up
        (``nan`` when the factorization itself failed).
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
