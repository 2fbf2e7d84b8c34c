"""Global homogeneous solutions of ``u_xx - u_t = 1{u>0}`` on the plane.

``v_plus = max(0, x)^2 / 2``, ``v_minus = max(0, -x)^2 / 2`` and the family
``v_m`` (``-1 <= m <= 0``)::

    v_m(x, t) = m t + (1 + m) x^2 / 2       t <= 0
              = t V_m(|x| / sqrt(t))        0 < t < C_m x^2
              = 0                           t >= C_m x^2

where ``V_m`` solves ``V'' + (xi/2) V' - V = 1`` with ``V(xi_m) = V'(xi_m) = 0``
and ``V ~ (1 + m) xi^2 / 2 + m`` at infinity; ``C_m = 1 / xi_m^2``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import ProfileError
from .grid_field import Field, GridSpec

# Integration tolerances of the shooting ODE.
_RTOL = 1e-12
_ATOL = 1e-14
# Distance past the launch point at which the first asymptotic estimate is taken;
# the decaying mode is ~exp(-xi^2/4) there.
_FIRST_CHECKPOINT = 8.0
_CHECKPOINT_STEP = 4.0


def _profile_rhs(xi, y):
    return [y[1], 1.0 + y[0] - 0.5 * xi * y[1]]


def asymptotic_coefficient(xi: float, V: float) -> float:
    """Quadratic coefficient ``k`` of ``V ~ k xi^2/2 + (k - 1)`` read off at ``xi``."""
    return (V + 1.0) / (0.5 * xi * xi + 1.0)


def shoot(xi0: float, tol: float = 1e-10, xi_cap: float = 200.0) -> float:
    """Asymptotic coefficient of the trajectory launched from ``(0, 0)`` at ``xi0``.

    Integrates outward in checkpoints until two successive estimates agree
    to ``tol``.
    """
    start, y = xi0, [0.0, 0.0]
    end = xi0 + _FIRST_CHECKPOINT
    prev = None
    while True:
        sol = solve_ivp(_profile_rhs, (start, end), y, method="RK45", rtol=_RTOL, atol=_ATOL)
        if not sol.success:
            raise ProfileError(f"integration failed from xi0={xi0}: {sol.message}")
        y = sol.y[:, -1]
        k = asymptotic_coefficient(end, y[0])
        if prev is not None and abs(k - prev) < tol:
            return k
        if end >= xi_cap:
            raise ProfileError(f"asymptotic coefficient not settled by xi={end} (xi0={xi0})")
        prev, start, end = k, end, end + _CHECKPOINT_STEP


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    """Tabulated ``V_m`` on ``[xi_m, xi_max]``; empty table for ``m = -1``."""

    m: float
    xi_m: float
    C_m: float
    xi: np.ndarray
    V: np.ndarray
    Vp: np.ndarray
    kappa: float

    @property
    def degenerate(self) -> bool:
        return self.xi.size == 0

    @property
    def xi_max(self) -> float:
        return float(self.xi[-1]) if self.xi.size else math.inf

    def _spline(self) -> CubicHermiteSpline:
        sp = self.__dict__.get("_sp")
        if sp is None:
            sp = CubicHermiteSpline(self.xi, self.V, self.Vp, extrapolate=False)
            object.__setattr__(self, "_sp", sp)
        return sp

    def value(self, xi) -> np.ndarray:
        """``V(xi)``: zero below ``xi_m``, asymptotic form above ``xi_max``."""
        xi = np.asarray(xi, dtype=float)
        if self.degenerate:
            return np.zeros_like(xi)
        out = np.zeros_like(xi)
        mid = (xi >= self.xi_m) & (xi <= self.xi_max)
        far = xi > self.xi_max
        out[mid] = self._spline()(xi[mid])
        out[far] = self.kappa * 0.5 * xi[far] ** 2 + (self.kappa - 1.0)
        return out

    def derivative(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.degenerate:
            return np.zeros_like(xi)
        out = np.zeros_like(xi)
        mid = (xi >= self.xi_m) & (xi <= self.xi_max)
        far = xi > self.xi_max
        out[mid] = self._spline()(xi[mid], 1)
        out[far] = self.kappa * xi[far]
        return out

    def ode_residual(self) -> np.ndarray:
        """``V'' + (xi/2) V' - V - 1`` on the table, ``V''`` from 4th-order differences of ``V'``."""
        xi, V, Vp = self.xi, self.V, self.Vp
        d = xi[1] - xi[0]
        Vpp = np.full_like(V, np.nan)
        Vpp[2:-2] = (-Vp[4:] + 8 * Vp[3:-1] - 8 * Vp[1:-3] + Vp[:-4]) / (12 * d)
        res = Vpp + 0.5 * xi * Vp - V - 1.0
        return res[2:-2]

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write(f"# m={self.m!r}, C_m={self.C_m!r}, xi_m={self.xi_m!r}\n")
            fh.write("xi,V,Vp\n")
            for a, b, c in zip(self.xi, self.V, self.Vp):
                fh.write(f"{a:.17g},{b:.17g},{c:.17g}\n")
        return path


def _tabulate(m: float, xi_m: float, kappa: float, xi_max: float, step: float) -> SelfSimilarProfile:
    xi = xi_m + step * np.arange(int(np.floor((xi_max - xi_m) / step)) + 1)
    sol = solve_ivp(_profile_rhs, (xi_m, xi[-1]), [0.0, 0.0], method="RK45",
                    rtol=_RTOL, atol=_ATOL, dense_output=True)
    if not sol.success:
        raise ProfileError(f"tabulation failed for m={m}: {sol.message}")
    V, Vp = sol.sol(xi)
    V[0] = Vp[0] = 0.0
    C = math.inf if xi_m == 0 else 1.0 / xi_m ** 2
    return SelfSimilarProfile(m, xi_m, C, xi, V, Vp, kappa)


def solve_profile(m: float, tol: float = 1e-10, xi_max: float = 40.0,
                  step: float = 0.01) -> SelfSimilarProfile:
    """Shoot for the free-boundary value ``xi_m`` of ``V_m`` and tabulate.

    The launch point is root-bracketed (Brent) until the asymptotic quadratic coefficient
    equals ``1 + m`` within ``tol``.  ``m = -1`` returns the degenerate
    profile (empty positive set, ``C_m = 0``); ``m = 0`` launches from 0.
    """
    if not -1.0 <= m <= 0.0:
        raise ValueError(f"m={m} outside [-1, 0]")
    if m == -1.0:
        empty = np.empty(0)
        return SelfSimilarProfile(-1.0, math.inf, 0.0, empty, empty, empty, 0.0)
    target = 1.0 + m
    k0 = shoot(0.0, tol)
    if abs(k0 - target) <= tol:
        return _tabulate(m, 0.0, k0, xi_max, step)
    lo, hi = 0.0, 1.0
    k_hi = shoot(hi, tol)
    while k_hi > target:
        lo, hi = hi, 2.0 * hi
        if hi > 64.0:
            raise ProfileError(f"no bracket for m={m}: coefficient stays above {target} on [0, 64]")
        k_hi = shoot(hi, tol)
    k_lo = shoot(lo, tol) if lo > 0 else k0
    mid = brentq(lambda z: shoot(z, tol) - target, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    k_mid = shoot(mid, tol)
    if abs(k_mid - target) > 10 * tol:
        raise ProfileError(f"m={m}: tolerance {tol} not reached (|k - (1+m)| = {abs(k_mid - target):.2e}, "
                           f"bracket coefficients {k_lo:.6g}, {k_hi:.6g})")
    prof = _tabulate(m, mid, k_mid, max(xi_max, mid + 2 * _FIRST_CHECKPOINT), step)
    return prof


_cache: dict[tuple, SelfSimilarProfile] = {}
_cache_lock = threading.Lock()


def get_profile(m: float, tol: float = 1e-10) -> SelfSimilarProfile:
    """Cached :func:`solve_profile`; concurrent callers compute once."""
    key = (float(m), float(tol))
    with _cache_lock:
        prof = _cache.get(key)
        if prof is None:
            prof = solve_profile(m, tol)
            _cache[key] = prof
    return prof


class ClosedForm:
    """Analytic solution exposing ``value``, ``dx``, ``dt`` and ``positive``."""

    name = "closed_form"
    # Singular free-boundary vertices where higher derivatives blow up.
    vertices: tuple = ()

    def __call__(self, x, t):
        return self.value(x, t)

    def positive(self, x, t) -> np.ndarray:
        return np.asarray(self.value(x, t)) > 0.0

    def field(self, grid: GridSpec) -> Field:
        return Field.from_function(grid, self.value, obstacle=True, source=self.name)


class VPlus(ClosedForm):
    name = "v_plus"

    def value(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return 0.5 * np.maximum(x, 0.0) ** 2

    def dx(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.maximum(x, 0.0)

    def dt(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.zeros_like(x)


class VMinus(ClosedForm):
    name = "v_minus"

    def value(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return 0.5 * np.maximum(-x, 0.0) ** 2

    def dx(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return -np.maximum(-x, 0.0)

    def dt(self, x, t):
        x, _ = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.zeros_like(x)


class VFamily(ClosedForm):
    """``v_m``; ``m = -1`` is ``max(0, -t)`` and ``m = 0`` is ``x^2 / 2``."""

    def __init__(self, m: float, profile: SelfSimilarProfile | None = None):
        if not -1.0 <= m <= 0.0:
            raise ValueError(f"m={m} outside [-1, 0]")
        self.m = float(m)
        self.name = f"v_m({self.m:g})"
        self._profile = profile
        if -1.0 < self.m < 0.0:
            self.vertices = ((0.0, 0.0),)

    @property
    def profile(self) -> SelfSimilarProfile:
        if self._profile is None:
            self._profile = get_profile(self.m)
        return self._profile

    @property
    def C_m(self) -> float:
        if self.m == -1.0:
            return 0.0
        if self.m == 0.0:
            return math.inf
        return self.profile.C_m

    def _split(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        past = t <= 0
        return x, t, past

    def value(self, x, t):
        x, t, past = self._split(x, t)
        m = self.m
        out = np.where(past, m * t + 0.5 * (1 + m) * x * x, 0.0)
        if m == 0.0:
            return 0.5 * x * x
        if m > -1.0:
            fut = ~past
            if fut.any():
                tf = t[fut]
                out = np.array(out, dtype=float)
                out[fut] = tf * self.profile.value(np.abs(x[fut]) / np.sqrt(tf))
        return out

    def dx(self, x, t):
        x, t, past = self._split(x, t)
        m = self.m
        if m == 0.0:
            return np.array(x, dtype=float)
        out = np.where(past, (1 + m) * x, 0.0)
        if m > -1.0:
            fut = ~past
            if fut.any():
                tf = t[fut]
                st = np.sqrt(tf)
                out = np.array(out, dtype=float)
                out[fut] = np.sign(x[fut]) * st * self.profile.derivative(np.abs(x[fut]) / st)
        return out

    def dt(self, x, t):
        x, t, past = self._split(x, t)
        m = self.m
        if m == 0.0:
            return np.zeros_like(x)
        out = np.where(past, m, 0.0).astype(float)
        if m > -1.0:
            fut = ~past
            if fut.any():
                xi = np.abs(x[fut]) / np.sqrt(t[fut])
                out[fut] = self.profile.value(xi) - 0.5 * xi * self.profile.derivative(xi)
        return out


def counterexample() -> VFamily:
    """``max(0, -t)``: a solution whose time derivative jumps at ``t = 0``."""
    fam = VFamily(-1.0)
    fam.name = "counterexample"
    return fam


def closed_form(name: str, m: float | None = None) -> ClosedForm:
    """Look up ``v_plus``, ``v_minus``, ``v_m`` (with ``m``) or ``counterexample``."""
    if name == "v_plus":
        return VPlus()
    if name == "v_minus":
        return VMinus()
    if name == "counterexample":
        return counterexample()
    if name in ("v_m", "v_family"):
        if m is None:
            raise ValueError("v_m needs a parameter m")
        return VFamily(m)
    raise ValueError(f"unknown closed form {name!r}")


def eval_closed_form(name: str, x, t, m: float | None = None):
    return closed_form(name, m).value(x, t)


def _band_mask(pos: np.ndarray, width: int) -> np.ndarray:
    """True where the positivity pattern is constant on a (2w+1)^2 node block."""
    nt, nx = pos.shape
    pad = np.pad(pos, width, mode="edge")
    same = np.ones_like(pos, dtype=bool)
    for dn in range(-width, width + 1):
        for di in range(-width, width + 1):
            shifted = pad[width + dn:width + dn + nt, width + di:width + di + nx]
            same &= shifted == pos
    return same


def residual_on_grid(form: ClosedForm | str, grid: GridSpec, band: int = 2,
                     core: float = 0.3, m: float | None = None, chunk: int = 2000) -> float:
    """Max discrete residual ``|u_xx - u_t - 1{u>0}|`` of a closed form.

    Nodes within ``band`` nodes (in x or t) of a positivity change are
    skipped, as are nodes within parabolic distance ``core`` of a singular
    vertex of the free boundary, where ``u_tt`` and ``u_xxxx`` grow like
    ``1/t`` and no uniform O(h^2) bound exists.  Box-edge nodes are skipped.
    The grid is processed in blocks of ``chunk`` time slices.
    """
    if isinstance(form, str):
        form = closed_form(form, m)
    x = grid.x
    h, tau = grid.h, grid.tau
    worst = 0.0
    for n0 in range(1, grid.nt, chunk):
        n1 = min(n0 + chunk, grid.nt)
        lo, hi = max(n0 - band - 1, 0), min(n1 + band, grid.nt)
        t = grid.t_min + tau * np.arange(lo, hi)
        X, T = np.meshgrid(x, t)
        u = np.asarray(form.value(X, T), dtype=float)
        pos = np.asarray(form.positive(X, T))
        uxx = np.full_like(u, np.nan)
        uxx[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / (h * h)
        ut = np.full_like(u, np.nan)
        ut[1:] = (u[1:] - u[:-1]) / tau
        res = np.abs(uxx - ut - pos)
        keep = _band_mask(pos, band)
        keep[:, :1] = keep[:, -1:] = False
        rows = np.arange(lo, hi)
        keep &= ((rows >= n0) & (rows < n1))[:, None]
        for (xv, tv) in form.vertices:
            keep &= np.maximum(np.abs(X - xv), np.sqrt(np.abs(T - tv))) >= core
        if keep.any():
            worst = max(worst, float(res[keep].max()))
    return worst
