"""Backward heat kernel, Weiss-type energy and the singular-point functional.

For a base point ``P0 = (x0, t0)`` and a negative offset ``t`` (``s = -t``)::

    E(t; u)     = int [ (u_x^2 + 2u) / s - u^2 / s^2 ] G(y, t) dy
    Lu          = -2u + y u_x + 2t u_t
    Phi^m(t; u) = int (u - v_m)^2 / t^2 G(y, t) dy
    dE/dt       = -1 / (2 s^3) int |Lu|^2 G dy

with ``u`` evaluated at ``(x0 + y, t0 + t)`` and
``G(y, t) = exp(-y^2 / (4s)) / (2 sqrt(pi s))``.

Every functional accepts a :class:`~obstacle1d.grid_field.Field` or any
object with vectorised ``value``, ``dx`` and ``dt`` methods (the closed
forms).  Integrals are composite Simpson over ``|y| <= R(t)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.special import erfc

from .closed_forms import VFamily, VPlus
from .errors import AdmissibilityError
from .grid_field import as_source

# Truncation radius in units of sqrt(-t); the kernel's standard deviation is
# sqrt(2) of these, so the neglected Gaussian mass is erfc(6) ~ 2e-17.
RADIUS_FACTOR = 12.0
# Simpson nodes used when the source has no grid.
ANALYTIC_POINTS = 4001


def heat_kernel(x, t):
    """``G(x, t)`` for ``t < 0``; solves ``G_xx + G_t = 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= 0):
        raise ValueError("heat kernel needs t < 0")
    s = -t
    return np.exp(-np.asarray(x, dtype=float) ** 2 / (4 * s)) / (2 * np.sqrt(np.pi * s))


class QuadratureResult(NamedTuple):
    value: float
    tail_bound: float
    radius: float

    def __float__(self) -> float:
        return float(self.value)


def _slab(src, P0, t: float, radius_factor: float, n_points: int | None):
    """Abscissae ``y`` of the quadrature slab and the absolute time."""
    if not t < 0:
        raise ValueError(f"offset t={t} must be negative")
    x0, t0 = P0
    s = -t
    R = radius_factor * math.sqrt(s)
    grid = getattr(src, "grid", None)
    if grid is not None:
        ta = t0 + t
        if ta < grid.t_min - 1e-12 * grid.tau or ta > grid.t_max + 1e-12 * grid.tau:
            raise AdmissibilityError(
                f"slab at time {ta:.6g} leaves the box [{grid.t_min}, {grid.t_max}]; "
                f"largest admissible |t| is {t0 - grid.t_min:.6g}",
                limit=t0 - grid.t_min)
        half = min(x0 - grid.x_min, grid.x_max - x0)
        if half <= 0:
            raise AdmissibilityError(f"base point x0={x0} is not inside the box", limit=0.0)
        R = min(R, half)
        if n_points is None:
            n_points = int(2 * math.ceil(2 * R / grid.h)) + 1
    if n_points is None:
        n_points = ANALYTIC_POINTS
    n_points = max(n_points | 1, 5)
    y = np.linspace(-R, R, n_points)
    return y, t0 + t, R, s


def _tail(weightless: np.ndarray, R: float, s: float) -> float:
    """Largest integrand magnitude (without G) times the kernel mass beyond R."""
    return float(np.max(np.abs(weightless)) * erfc(R / (2 * math.sqrt(s))))


def energy(u, P0=(0.0, 0.0), t: float = -1.0, radius_factor: float = RADIUS_FACTOR,
           n_points: int | None = None) -> QuadratureResult:
    """Weiss-type energy ``E(t; u)`` about ``P0`` with a tail-bound estimate."""
    src = as_source(u)
    y, ta, R, s = _slab(src, P0, t, radius_factor, n_points)
    xs = P0[0] + y
    val = src.value(xs, ta)
    ux = src.dx(xs, ta)
    F = (ux * ux + 2 * val) / s - val * val / (s * s)
    G = heat_kernel(y, t)
    return QuadratureResult(float(simpson(F * G, x=y)), _tail(F, R, s), R)


def scaling_operator_L(u, x, t, P0=(0.0, 0.0)):
    """``Lu = -2u + y u_x + 2 tt u_t`` at absolute ``(x, t)``, ``(y, tt)`` relative to P0."""
    src = as_source(u)
    y = np.asarray(x, dtype=float) - P0[0]
    tt = np.asarray(t, dtype=float) - P0[1]
    return -2 * src.value(x, t) + y * src.dx(x, t) + 2 * tt * src.dt(x, t)


def L_norm(u, P0=(0.0, 0.0), t: float = -1.0, radius_factor: float = RADIUS_FACTOR,
           n_points: int | None = None) -> QuadratureResult:
    """``int |Lu|^2 G dy`` at offset ``t``."""
    src = as_source(u)
    y, ta, R, s = _slab(src, P0, t, radius_factor, n_points)
    xs = P0[0] + y
    Lu = -2 * src.value(xs, ta) + y * src.dx(xs, ta) + 2 * t * src.dt(xs, ta)
    F = Lu * Lu
    return QuadratureResult(float(simpson(F * heat_kernel(y, t), x=y)), _tail(F, R, s), R)


def phi(u, P0=(0.0, 0.0), m: float = 0.0, t: float = -1.0,
        radius_factor: float = RADIUS_FACTOR, n_points: int | None = None) -> QuadratureResult:
    """``Phi^{v_m}(t; u) = t^-2 int (u - v_m)^2 G dy``, ``u`` recentred at P0."""
    src = as_source(u)
    y, ta, R, s = _slab(src, P0, t, radius_factor, n_points)
    diff = src.value(P0[0] + y, ta) - VFamily(m).value(y, t)
    F = diff * diff / (t * t)
    return QuadratureResult(float(simpson(F * heat_kernel(y, t), x=y)), _tail(F, R, s), R)


def l2g_distance(u, v, P0=(0.0, 0.0), t: float = -1.0,
                 radius_factor: float = RADIUS_FACTOR, n_points: int | None = None) -> float:
    """``(int (u - v)^2 G dy)^(1/2)`` at offset ``t``; ``v`` is centred at the origin."""
    src = as_source(u)
    y, ta, R, s = _slab(src, P0, t, radius_factor, n_points)
    diff = src.value(P0[0] + y, ta) - v.value(y, t)
    return float(math.sqrt(max(simpson(diff * diff * heat_kernel(y, t), x=y), 0.0)))


class DerivativeCheck(NamedTuple):
    lhs: float
    rhs: float
    residual: float

    @property
    def relative(self) -> float:
        scale = max(abs(self.rhs), abs(self.lhs))
        return self.residual / scale if scale > 0 else 0.0


def energy_derivative_residual(u, P0=(0.0, 0.0), t: float = -0.5, dt: float = 1e-3,
                               radius_factor: float = RADIUS_FACTOR) -> DerivativeCheck:
    """Compare the centred difference of ``E`` with ``-(2 s^3)^-1 int |Lu|^2 G``."""
    if not t + dt < 0:
        raise ValueError("t + dt must stay negative")
    e_hi = energy(u, P0, t + dt, radius_factor).value
    e_lo = energy(u, P0, t - dt, radius_factor).value
    lhs = (e_hi - e_lo) / (2 * dt)
    rhs = -L_norm(u, P0, t, radius_factor).value / (2 * (-t) ** 3)
    return DerivativeCheck(lhs, rhs, abs(lhs - rhs))


@dataclass
class TraceRecord:
    t: float
    E: float
    L_norm: float
    tail: float
    radius: float
    admissible: bool
    phi: dict = field(default_factory=dict)


@dataclass
class EnergyTrace:
    P0: tuple
    records: list
    E0: float

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E for r in self.records])

    def phi_values(self, m: float) -> np.ndarray:
        return np.array([r.phi.get(m, np.nan) for r in self.records])

    def admissible(self) -> list:
        return [r for r in self.records if r.admissible]

    def write_csv(self, path) -> Path:
        """Trace CSV ``t,E,Lnorm,phi_<m>...``, one ``phi`` column per traced ``m``."""
        path = Path(path)
        ms = sorted({m for r in self.records for m in r.phi})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "E", "Lnorm"] + [f"phi_{m:g}" for m in ms])
            for r in self.records:
                w.writerow([f"{r.t:.17g}", f"{r.E:.17g}", f"{r.L_norm:.17g}"]
                           + [f"{r.phi.get(m, math.nan):.17g}" for m in ms])
        return path


def extrapolate_limit(values: Sequence[float]) -> float:
    """Aitken/Richardson limit of the last three values of a geometric ladder.

    Falls back to the last value when the differences do not contract.
    """
    if len(values) < 3:
        raise ValueError("need three values to extrapolate")
    e1, e2, e3 = values[-3:]
    d1, d2 = e2 - e1, e3 - e2
    denom = d2 - d1
    if abs(d2) <= 1e-14 * max(1.0, abs(e3)) or denom == 0 or abs(d2) >= abs(d1):
        return float(e3)
    return float(e3 - d2 * d2 / denom)


def energy_trace(u, P0=(0.0, 0.0), t_ladder: Sequence[float] = (-1.0, -0.5, -0.25, -0.125),
                 phi_m: Sequence[float] = (), radius_factor: float = RADIUS_FACTOR,
                 tail_tol: float = 1e-6) -> EnergyTrace:
    """Energy and ``L``-norm along ``t_ladder`` (sorted toward ``0-``).

    A time is admissible when it lies in the data box and the truncation
    tail bound is below ``tail_tol * (1 + |E|)``.  ``E(0-)`` is extrapolated
    from the last three admissible points.
    """
    src = as_source(u)
    records = []
    for t in sorted(float(v) for v in t_ladder):
        try:
            e = energy(src, P0, t, radius_factor)
            ln = L_norm(src, P0, t, radius_factor)
        except AdmissibilityError:
            continue
        ok = e.tail_bound <= tail_tol * (1 + abs(e.value))
        rec = TraceRecord(t, e.value, ln.value, e.tail_bound, e.radius, ok)
        for m in phi_m:
            rec.phi[m] = phi(src, P0, m, t, radius_factor).value
        records.append(rec)
    good = [r.E for r in records if r.admissible]
    if len(good) < 3:
        raise AdmissibilityError(f"energy trace has {len(good)} admissible times; need 3")
    return EnergyTrace(tuple(P0), records, extrapolate_limit(good))


@lru_cache(maxsize=None)
def calibration() -> tuple[float, float]:
    """``(E(-1; v_plus), E(-1; v_0))`` from this module's own quadrature."""
    return energy(VPlus(), (0.0, 0.0), -1.0).value, energy(VFamily(0.0), (0.0, 0.0), -1.0).value
