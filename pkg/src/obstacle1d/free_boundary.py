"""Discrete free boundary extraction and local measurements of ``u_t``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .coefficients import CoefficientSet
from .errors import AdmissibilityError
from .grid_field import Field

SPATIAL = "spatial"
TEMPORAL = "temporal"


@dataclass(frozen=True)
class FreeBoundaryPoint:
    x: float
    t: float
    orientation: str
    side: int
    quad_coeff: float = math.nan

    @property
    def P(self) -> tuple[float, float]:
        return (self.x, self.t)


@dataclass
class FreeBoundarySet:
    points: list = field(default_factory=list)
    zero_tol: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def by_slice(self, grid) -> dict[int, list]:
        """Points grouped by the nearest time level."""
        out: dict[int, list] = {}
        for p in self.points:
            n = int(round((p.t - grid.t_min) / grid.tau))
            out.setdefault(n, []).append(p)
        return out

    def of(self, orientation: str) -> list:
        return [p for p in self.points if p.orientation == orientation]

    def nearest(self, x: float, t: float, orientation: str | None = None) -> FreeBoundaryPoint:
        cands = self.points if orientation is None else self.of(orientation)
        if not cands:
            raise ValueError("free boundary set is empty")
        return min(cands, key=lambda p: (p.x - x) ** 2 + abs(p.t - t))

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "orientation", "side", "quad_coeff"])
            for p in self.points:
                w.writerow([f"{p.t:.17g}", f"{p.x:.17g}", p.orientation, p.side,
                            f"{p.quad_coeff:.17g}"])
        return path


def default_zero_tol(u: Field, coeffs: CoefficientSet | None = None) -> float:
    """``0.25 (delta / max a) h^2``: below the quadratic growth forced by f >= delta."""
    if coeffs is None:
        ratio = 1.0
    else:
        ratio = coeffs.delta / float(np.max(coeffs.on_grid(u.grid)["a"]))
    return 0.25 * ratio * u.grid.h ** 2


def _fit_root(xs: np.ndarray, us: np.ndarray):
    """Fit ``u = q (x - x0)^2`` through positive samples via ``sqrt(u)`` linear in x."""
    r = np.sqrt(np.maximum(us, 0.0))
    A = np.column_stack([np.ones_like(xs), xs])
    (alpha, beta), *_ = np.linalg.lstsq(A, r, rcond=None)
    if beta == 0 or not np.isfinite(beta):
        return None, math.nan
    return -alpha / beta, beta * beta


def extract(u: Field, coeffs: CoefficientSet | None = None,
            zero_tol: float | None = None) -> FreeBoundarySet:
    """Free boundary ``Gamma`` of ``u`` from zero/positive node transitions.

    A node is zero iff ``u <= zero_tol``.  Spatial transitions in each time
    slice are located by fitting ``q (x - x0)^2`` to the three nearest
    positive nodes; temporal transitions in each column are located by
    linear interpolation in t.  Empty when ``u`` has no transition.
    """
    g = u.grid
    if zero_tol is None:
        zero_tol = default_zero_tol(u, coeffs)
    v = u.values
    zero = v <= zero_tol
    x = g.x
    t = g.t
    h, tau = g.h, g.tau
    pts = []

    # spatial transitions, slice by slice
    n_idx, i_idx = np.nonzero(zero[:, :-1] != zero[:, 1:])
    for n, i in zip(n_idx, i_idx):
        if zero[n, i]:
            side, zi = 1, i
            k = np.arange(i + 1, min(i + 4, g.nx))
        else:
            side, zi = -1, i + 1
            k = np.arange(i, max(i - 3, -1), -1)
        k = k[~zero[n, k]] if k.size else k
        # keep only the run of positive nodes adjacent to the transition
        run = []
        for kk in k:
            if run and abs(kk - run[-1]) != 1:
                break
            run.append(kk)
        # the root may sit up to one cell behind the zero node, since nodes
        # just below zero_tol count as zero
        far = x[max(zi - 1, 0)] if side == 1 else x[min(zi + 1, g.nx - 1)]
        lo, hi = sorted((far, x[i + 1] if side == 1 else x[i]))
        if len(run) >= 2:
            x0, q = _fit_root(x[run], v[n, run])
            if x0 is None:
                x0 = x[zi]
        else:
            x0, q = x[zi], math.nan
        x0 = float(min(max(x0, lo), hi))
        pts.append(FreeBoundaryPoint(x0, float(t[n]), SPATIAL, side, float(q)))

    # temporal transitions, column by column
    n_idx, i_idx = np.nonzero(zero[:-1, :] != zero[1:, :])
    for n, i in zip(n_idx, i_idx):
        a, b = v[n, i], v[n + 1, i]
        side = 1 if zero[n, i] else -1
        if a != b:
            frac = min(max(a / (a - b), 0.0), 1.0)
        else:
            frac = 0.5
        pts.append(FreeBoundaryPoint(float(x[i]), float(t[n] + frac * tau), TEMPORAL, side))

    pts.sort(key=lambda p: (p.t, p.x))
    kept: list = []
    for p in pts:
        dup = False
        for q in reversed(kept):
            if p.t - q.t >= tau / 2:
                break
            if abs(p.x - q.x) < h / 2:
                dup = True
                break
        if not dup:
            kept.append(p)
    return FreeBoundarySet(kept, zero_tol)


def _band_free(zero: np.ndarray) -> np.ndarray:
    """True where the zero/positive status is constant on the 3x3 node block."""
    nt, nx = zero.shape
    pad = np.pad(zero, 1, mode="edge")
    same = np.ones_like(zero, dtype=bool)
    for dn in (-1, 0, 1):
        for di in (-1, 0, 1):
            same &= pad[1 + dn:1 + dn + nt, 1 + di:1 + di + nx] == zero
    return same


class UtJump(NamedTuple):
    sup_ut: float
    inf_ut: float
    jump: float


class _UtProbe:
    """Cached discrete ``u_t`` and band mask of one field."""

    def __init__(self, u: Field, zero_tol: float):
        self.u = u
        self.ut = u.derived[0].values
        self.clean = _band_free(u.values <= zero_tol)

    def window(self, P0, r: float, clip: bool):
        g = self.u.grid
        x0, t0 = P0
        if not clip:
            if (x0 - r < g.x_min - 1e-12 or x0 + r > g.x_max + 1e-12
                    or t0 - r * r < g.t_min - 1e-12 or t0 + r * r > g.t_max + 1e-12):
                raise AdmissibilityError(f"Q_r box of radius {r} around {P0} leaves the grid")
        i_lo = max(int(math.floor((x0 - r - g.x_min) / g.h)) + 1, 0)
        i_hi = min(int(math.ceil((x0 + r - g.x_min) / g.h)) - 1, g.nx - 1)
        n_lo = max(int(math.floor((t0 - r * r - g.t_min) / g.tau)) + 1, 0)
        n_hi = min(int(math.ceil((t0 + r * r - g.t_min) / g.tau)) - 1, g.nt - 1)
        if i_hi < i_lo or n_hi < n_lo:
            return np.empty(0)
        sl = (slice(n_lo, n_hi + 1), slice(i_lo, i_hi + 1))
        return self.ut[sl][self.clean[sl]]


def min_radius(u: Field) -> float:
    return 2.0 * max(u.grid.h, math.sqrt(u.grid.tau))


def ut_jump(u: Field, P0, r: float, zero_tol: float | None = None,
            probe: _UtProbe | None = None) -> UtJump:
    """``sup - inf`` of the discrete ``u_t`` over ``Q_r(P0)`` off the kink band.

    Nodes whose 3x3 neighbourhood mixes zero and positive nodes are skipped.
    """
    if r < min_radius(u) * (1 - 1e-12):
        raise ValueError(f"radius {r} below the resolvable minimum {min_radius(u):.4g}")
    if probe is None:
        probe = _UtProbe(u, default_zero_tol(u) if zero_tol is None else zero_tol)
    vals = probe.window(P0, r, clip=False)
    if vals.size == 0:
        return UtJump(math.nan, math.nan, math.nan)
    hi, lo = float(vals.max()), float(vals.min())
    return UtJump(hi, lo, hi - lo)


@dataclass
class LiminfCheck:
    radii: list
    values: list
    tol_pos: float
    passed: bool

    @property
    def final(self) -> float:
        finite = [v for v in self.values if np.isfinite(v)]
        return finite[-1] if finite else math.nan


def liminf_ut_check(u: Field, P0, radii: Sequence[float] | None = None,
                    tol_pos: float | None = None, zero_tol: float | None = None) -> LiminfCheck:
    """``inf u_t`` over shrinking boxes ``Q_r(P0)``; passes iff the last is ``<= tol_pos``.

    Boxes are clipped to the grid.  ``tol_pos`` defaults to ``10 (h + tau)``.
    """
    g = u.grid
    if isinstance(P0, FreeBoundaryPoint):
        P0 = P0.P
    if radii is None:
        r0 = min_radius(u)
        radii = [r0 * 4, r0 * 2, r0]
    if tol_pos is None:
        tol_pos = 10.0 * (g.h + g.tau)
    probe = _UtProbe(u, default_zero_tol(u) if zero_tol is None else zero_tol)
    values = []
    for r in sorted(radii, reverse=True):
        vals = probe.window(P0, r, clip=True)
        values.append(float(vals.min()) if vals.size else math.nan)
    finite = [v for v in values if np.isfinite(v)]
    passed = bool(finite) and finite[-1] <= tol_pos
    return LiminfCheck(sorted(radii, reverse=True), values, tol_pos, passed)
