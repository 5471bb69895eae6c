"""Exception and warning classes shared across the package."""


class KoiterError(Exception):
    """Base class for all package errors."""


class ValidationError(KoiterError, ValueError):
    """Invalid user-supplied configuration or parameters."""


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BadGridSize(ValidationError):
    pass


class BadFieldSpec(ValidationError):
    pass


class DegenerateChart(KoiterError, ValueError):
    """Covariant tangents are (numerically) linearly dependent."""


class NumericalError(KoiterError, ArithmeticError):
    """Runtime numerical failure (maps to CLI exit code 2)."""


class NonFiniteState(NumericalError):
    pass


class NonFiniteEnergy(NumericalError):
    pass


class DegenerateWindow(NumericalError):
    pass


class FormatError(KoiterError, ValueError):
    """Malformed grid dump."""


class SmallDisplacementViolated(UserWarning):
    """max |grad eta| exceeded the configured small-displacement bound."""


class StabilityWarning(UserWarning):
    """An unstable mode grows too fast for the chosen time step."""
