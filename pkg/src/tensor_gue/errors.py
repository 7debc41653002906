"""Exception types shared by every module."""


class TensorGueError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TensorGueError, ValueError):
    """Input has the wrong shape, is not Hermitian, or is otherwise malformed."""


class ModelAssumptionError(InvalidArgumentError):
    """A leg subset violates the standing assumption ``|J| > m/2``."""


class SizeLimitError(TensorGueError):
    """A computation would exceed one of the documented size caps."""


class ConvergenceError(TensorGueError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        Residual at the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
