"""
Custom exceptions for the qdphonon library.
"""
from typing import Any, Dict, Optional


class QDPhononError(Exception):
    """Base exception for all qdphonon errors."""
    pass


class ParameterError(QDPhononError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""
    pass


class QuadratureError(QDPhononError):
    """Raised when a numerical integral cannot be evaluated to tolerance."""

    def __init__(self, message: str, best_estimate: Optional[complex] = None,
                 abs_error_estimate: Optional[float] = None,
                 abscissa: Optional[float] = None):
        self.best_estimate = best_estimate
        self.abs_error_estimate = abs_error_estimate
        self.abscissa = abscissa
        super().__init__(message)


class FitError(QDPhononError):
    """Raised when a least-squares fit cannot be carried out."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class GridResolutionError(QDPhononError):
    """Raised when refining an integration grid moves the result too much."""

    def __init__(self, message: str, coarse: float, fine: float):
        self.coarse = coarse
        self.fine = fine
        super().__init__(message)


class DataError(QDPhononError):
    """Raised for malformed or degenerate measurement data."""
    pass


class ConfigError(QDPhononError):
    """Raised when a configuration record cannot be resolved."""
    pass
