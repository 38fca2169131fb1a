"""Exception types shared across the package."""


class ParabolicaError(Exception):
    """Base class for all package errors."""


class ConfigError(ParabolicaError, ValueError):
    """A requested operation is missing configuration (e.g. an absent constant)."""


class InputError(ParabolicaError, ValueError):
    """Bad numerical input: non-finite coefficients, dimension mismatch, etc."""


class SolveError(ParabolicaError, RuntimeError):
    """An iterative solve failed to reach its tolerance."""


class ParseError(ParabolicaError, ValueError):
    """Scenario / expression syntax or semantic error, carrying position info."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, col {col})"
        super().__init__(message)
