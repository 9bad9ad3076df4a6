# errors.py
# Exception hierarchy shared by every adaptsym module.
# The CLI maps these classes onto process exit codes.


class AdaptSymError(Exception):
    """Base class for all adaptsym errors."""


class FcidumpError(AdaptSymError, ValueError):
    """Malformed or inconsistent FCIDUMP input."""

    def __init__(self, message, line=None):
        self.line = line
        self.detail = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SectorError(AdaptSymError, ValueError):
    """Contradictory sector constraints or a state outside its basis."""


class ConfigError(AdaptSymError, ValueError):
    """Invalid run configuration or command-line option."""


class NumericalError(AdaptSymError, ArithmeticError):
    """Non-finite or otherwise unusable numerical result."""


class ConvergenceError(NumericalError):
    """An iterative solver gave up before converging."""


class DimensionCapError(AdaptSymError, RuntimeError):
    """Lie closure grew past its configured dimension cap."""

    def __init__(self, cap, reached):
        self.cap = cap
        self.reached = reached
        super().__init__(
            f"Lie algebra dimension {reached} exceeds cap {cap}; "
            f"raise --cap or use a smaller sector"
        )
