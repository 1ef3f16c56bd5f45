"""Exception hierarchy shared across the toolkit.

The CLI maps each family onto an exit code, so modules raise the most
specific class that applies rather than bare ``ValueError``.
"""


class SpatialKFError(Exception):
    """Base class for every error raised by spatialkf."""


class ConfigError(SpatialKFError, ValueError):
    """Invalid run configuration or parameter."""


class DataError(SpatialKFError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(SpatialKFError, ArithmeticError):
    """A linear-algebra step failed."""


class FactorizationError(NumericalError):
    """The innovation covariance was not numerically positive definite."""

    def __init__(self, year, message=None):
        self.year = year
        super().__init__(message or f"innovation covariance is not positive definite (year {year})")


class ProtocolError(SpatialKFError, RuntimeError):
    """Predict/update called out of order."""
