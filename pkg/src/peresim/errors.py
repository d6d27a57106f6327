"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class UsageError(ToolkitError):
    """An operation was called in a state it does not support."""


class DomainError(ToolkitError, ValueError):
    """An input value violates the operation's domain contract."""


class ConfigurationError(ToolkitError):
    """A configuration is internally inconsistent (e.g. non-monotone detector)."""


class DegenerateDataError(ToolkitError):
    """The data admits no meaningful result (e.g. zero normalisation)."""


class DataError(ToolkitError):
    """Malformed or insufficient measurement data."""


class AnalysisError(ToolkitError):
    """An analysis step has no solution for the given inputs."""


class FitError(ToolkitError):
    """Nonlinear fit did not converge; carries the best parameters seen."""

    def __init__(self, message: str, params=None, residual_norm: float | None = None):
        super().__init__(message)
        self.params = params
        self.residual_norm = residual_norm
