"""Exception hierarchy shared by the library and the command line."""


class SweBathyError(Exception):
    """Base class for all errors raised by swebathy."""


class ConfigurationError(SweBathyError, ValueError):
    """Invalid parameters or configuration values."""


class UsageError(SweBathyError, ValueError):
    """Inputs with incompatible shapes, grids or time axes."""


class DomainError(SweBathyError, ValueError):
    """A query falls outside the range where data is defined (no extrapolation)."""


class ParseError(SweBathyError, ValueError):
    """Malformed input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalFailure(SweBathyError, RuntimeError):
    """A solver produced a non-physical or non-finite state."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class DryBoundaryError(NumericalFailure):
    """Prescribed water depth at the inflow boundary is not positive."""
