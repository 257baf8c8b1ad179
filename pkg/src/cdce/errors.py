"""Exception types raised across the package."""


class CDCEError(Exception):
    """Base class for all package errors."""


class ParseError(CDCEError):
    """A file could not be decoded (bad header, truncated payload)."""


class UnsupportedFormat(CDCEError):
    """A file decoded fine but holds data this package does not handle."""


class ShapeError(CDCEError, ValueError):
    """Array or image dimensions disagree."""


class ConfigError(CDCEError, ValueError):
    """Invalid parameters, inconsistent provenance, or bad configuration."""


class NumericalError(CDCEError, ArithmeticError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
