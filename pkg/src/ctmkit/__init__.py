"""Numerical toolkit for one-dimensional charge-transfer models."""

__version__ = "0.1.0"

from .errors import ConfigError, CTMError, NumericalError, RangeError, SingularDivisionError  # noqa: E402

__all__ = ["__version__", "CTMError", "ConfigError", "NumericalError", "RangeError", "SingularDivisionError"]
