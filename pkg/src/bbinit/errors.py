"""Exception types raised across the package."""


class BBInitError(Exception):
    """Base class for all errors raised by bbinit."""


class InvalidInputError(BBInitError, ValueError):
    pass


class ConvergenceError(BBInitError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``residual`` carries the final violation (KKT gap for SMO, relative
    residual for conjugate gradient).
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class InsufficientBackgroundError(BBInitError):
    pass


class DegenerateScribbleError(BBInitError):
    pass


class DatasetError(InvalidInputError):
    """A dataset directory is missing files or is inconsistent."""
