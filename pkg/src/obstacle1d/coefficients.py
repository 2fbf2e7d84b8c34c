"""Coefficient sets ``a, b, c, f`` and their non-degeneracy check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExprError, HypothesisViolation
from .expr import Node, as_expr, pretty_print
from .grid_field import GridSpec

NAMES = ("a", "b", "c", "f")


@dataclass(frozen=True)
class CoefficientSet:
    """Operator ``a u_xx + b u_x + c u - u_t = f 1{u>0}`` with bound ``delta``."""

    a: Node
    b: Node
    c: Node
    f: Node
    delta: float

    def __post_init__(self) -> None:
        for name in NAMES:
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        if not self.delta > 0:
            raise HypothesisViolation(f"delta must be positive, got {self.delta}")

    @classmethod
    def constant(cls, a: float = 1.0, b: float = 0.0, c: float = 0.0, f: float = 1.0,
                 delta: float | None = None) -> "CoefficientSet":
        if delta is None:
            delta = min(a, f)
        return cls(a, b, c, f, delta)

    def at(self, x, t) -> dict[str, np.ndarray]:
        """Evaluate all four coefficients at ``(x, t)`` (broadcast)."""
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        return {n: np.broadcast_to(getattr(self, n)(x, t), shape) for n in NAMES}

    def on_grid(self, grid: GridSpec) -> dict[str, np.ndarray]:
        """Nodal values, shape ``(nt, nx)``; raises on non-finite values."""
        X, T = grid.mesh()
        out = {}
        for name in NAMES:
            vals = np.broadcast_to(getattr(self, name)(X, T), X.shape)
            bad = ~np.isfinite(vals)
            if bad.any():
                n, i = np.argwhere(bad)[0]
                raise ExprError(
                    f"coefficient {name} = {pretty_print(getattr(self, name))} is not finite "
                    f"at node (i={i}, n={n}) = ({X[n, i]:.6g}, {T[n, i]:.6g})")
            out[name] = np.array(vals, dtype=float)
        return out

    def describe(self) -> dict[str, str]:
        d = {n: pretty_print(getattr(self, n)) for n in NAMES}
        d["delta"] = repr(self.delta)
        return d


@dataclass
class ValidationReport:
    min_a: float
    min_f: float
    max_c: float
    max_difference: dict[str, float] = field(default_factory=dict)
    a_ok: bool = True
    f_ok: bool = True
    differences_ok: bool = True
    delta: float = 0.0

    @property
    def passed(self) -> bool:
        return self.a_ok and self.f_ok

    def messages(self) -> list[str]:
        out = []
        if not self.a_ok:
            out.append(f"hypothesis a >= delta violated: min a = {self.min_a:.6g} < delta = {self.delta:.6g}")
        if not self.f_ok:
            out.append(f"hypothesis f >= delta violated: min f = {self.min_f:.6g} < delta = {self.delta:.6g}")
        if not self.differences_ok:
            out.append("coefficient difference quotients are not bounded on the grid")
        return out


# Difference quotients above this are treated as a failure of the C^1 surrogate.
MAX_DIFFERENCE_QUOTIENT = 1e8


def validate(coeffs: CoefficientSet, grid: GridSpec) -> ValidationReport:
    """Check ``a >= delta`` and ``f >= delta`` at every node of ``grid``.

    Also reports the largest finite-difference quotient of each coefficient
    in x and t.  The report passes iff both lower bounds hold.
    """
    vals = coeffs.on_grid(grid)
    diffs = {}
    for name, v in vals.items():
        qx = np.abs(np.diff(v, axis=1)).max() / grid.h
        qt = np.abs(np.diff(v, axis=0)).max() / grid.tau
        diffs[name] = float(max(qx, qt))
    rep = ValidationReport(
        min_a=float(vals["a"].min()),
        min_f=float(vals["f"].min()),
        max_c=float(vals["c"].max()),
        max_difference=diffs,
        delta=coeffs.delta,
    )
    rep.a_ok = rep.min_a >= coeffs.delta
    rep.f_ok = rep.min_f >= coeffs.delta
    rep.differences_ok = all(q < MAX_DIFFERENCE_QUOTIENT for q in diffs.values())
    return rep


def require_valid(coeffs: CoefficientSet, grid: GridSpec) -> ValidationReport:
    rep = validate(coeffs, grid)
    if not rep.passed:
        raise HypothesisViolation("; ".join(rep.messages()))
    return rep
