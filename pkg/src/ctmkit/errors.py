"""Exception hierarchy.  The CLI maps these onto process exit codes."""


class CTMError(Exception):
    """Base class for toolkit errors."""


class ConfigError(CTMError, ValueError):
    """Invalid configuration or mismatched inputs (exit code 2)."""


class NumericalError(CTMError, ArithmeticError):
    """A numerical procedure failed to meet its contract (exit code 3)."""


class RangeError(NumericalError):
    """A shifted evaluation left the frequency grid."""


class SingularDivisionError(NumericalError):
    """Division by a transmission coefficient that is numerically zero."""
