"""Exception types shared across the package."""


class VaribError(Exception):
    """Base class for all package errors."""


class ConfigError(VaribError):
    """Invalid configuration or precondition violation."""


class NumericalError(VaribError):
    """A solve failed numerically (singular system, non-finite objective, ...).

    May carry a partial fit trace in the ``trace`` attribute.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MatrixFormatError(VaribError, IOError):
    """Malformed binary matrix file."""
