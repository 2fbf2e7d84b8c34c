"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class ObstacleError(Exception):
    """Base class for all package errors."""


class GridError(ObstacleError, ValueError):
    """Degenerate grid or out-of-box query."""


class ExprError(ObstacleError, ValueError):
    """Expression could not be parsed or evaluated."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class HypothesisViolation(ObstacleError):
    """Coefficients fail the non-degeneracy hypothesis a, f >= delta."""


class MMatrixError(ObstacleError):
    """Assembled time-step matrix is not a strictly dominant M-matrix."""

    def __init__(self, message: str, node: int, required_tau: float):
        super().__init__(message)
        self.node = node
        self.required_tau = required_tau


class NonConvergenceError(ObstacleError):
    """Projected SOR hit its sweep cap."""

    def __init__(self, message: str, residual: float, level: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.level = level


class AdmissibilityError(ObstacleError):
    """A requested slab, box or rescaling leaves the data box."""

    def __init__(self, message: str, limit: float | None = None):
        super().__init__(message)
        self.limit = limit


class ProfileError(ObstacleError):
    """Shooting for a self-similar profile failed."""


class ConfigError(ObstacleError):
    """Scenario configuration is malformed."""


class DegenerateLimitError(ObstacleError):
    """A blow-up limit vanishes identically and cannot be matched."""
