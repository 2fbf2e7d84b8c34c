"""Time stepping of the obstacle problem as a sequence of tridiagonal LCPs.

Each step solves ``U >= 0, A U - q >= 0, U.(A U - q) = 0`` with
``A = I/tau - theta L_h`` and ``q = u_prev/tau + (1 - theta) L_h u_prev - f``
by projected SOR.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import CoefficientSet, require_valid
from .errors import MMatrixError, NonConvergenceError, ObstacleError
from .grid_field import Field, GridSpec

logger = logging.getLogger(__name__)

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


@dataclass(frozen=True)
class SolveConfig:
    theta: float = 1.0
    omega: float = 1.5
    tol: float = 1e-8
    max_iter: int = 20000

    def __post_init__(self) -> None:
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta={self.theta} outside [0.5, 1]")
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega={self.omega} outside (0, 2)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class TimeStepSystem:
    """Interior tridiagonal system for one step; ``sub[0]``, ``sup[-1]`` unused."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def residual(self, U: np.ndarray) -> np.ndarray:
        return tridiag_matvec(self.sub, self.diag, self.sup, U) - self.q

    def dense(self) -> np.ndarray:
        n = len(self.diag)
        A = np.diag(self.diag)
        if n > 1:
            A += np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)
        return A


def tridiag_matvec(sub, diag, sup, U):
    r = diag * U
    r[1:] += sub[1:] * U[:-1]
    r[:-1] += sup[:-1] * U[1:]
    return r


def operator_bands(a, b, c, h: float):
    """Bands ``(lower, centre, upper)`` of ``L_h = a D2 + b D1 + c``.

    ``D1`` is central unless the cell Peclet number ``|b| h / (2 a)`` exceeds
    one, where it becomes first-order upwind in the direction of ``b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    h2 = h * h
    upwind = np.abs(b) * h > 2.0 * a
    lower = np.where(upwind, a / h2 + np.maximum(-b, 0.0) / h, a / h2 - b / (2 * h))
    upper = np.where(upwind, a / h2 + np.maximum(b, 0.0) / h, a / h2 + b / (2 * h))
    centre = np.where(upwind, -2 * a / h2 - np.abs(b) / h, -2 * a / h2) + c
    return lower, centre, upper


def apply_operator(lower, centre, upper, u_full):
    """``L_h u`` at the interior nodes of a full slice ``u_full``."""
    return lower * u_full[:-2] + centre * u_full[1:-1] + upper * u_full[2:]


def _check_m_matrix(sub, diag, sup, tau, theta, c, grid_x=None, level=None):
    off_bad = (sub > 0) | (sup > 0)
    margin = diag - np.abs(sub) - np.abs(sup)
    # Rows at the Dirichlet edges drop one neighbour; judge every row by the
    # interior criterion so the error names the real constraint.
    interior_margin = 1.0 / tau - theta * c
    bad = off_bad | (interior_margin <= 0) | (margin <= 0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        cmax = float(np.max(c))
        need = np.inf if cmax <= 0 else 1.0 / (theta * cmax)
        where = f"interior node {k + 1}"
        if grid_x is not None:
            where += f" (x={grid_x[k + 1]:.6g})"
        if level is not None:
            where += f" at time level {level}"
        raise MMatrixError(
            f"time-step matrix is not a strictly dominant M-matrix at {where}: "
            f"1/tau - theta*c = {interior_margin[k]:.6g}; need tau < {need:.6g}",
            node=k + 1, required_tau=need)


def _assemble(a, b, c, f, h, tau, theta, u_prev, bc_next, grid_x=None, level=None):
    lower, centre, upper = operator_bands(a, b, c, h)
    sub = -theta * lower
    diag = 1.0 / tau - theta * centre
    sup = -theta * upper
    _check_m_matrix(sub, diag, sup, tau, theta, np.asarray(c) * np.ones_like(diag),
                    grid_x, level)
    q = u_prev[1:-1] / tau - f
    if theta < 1.0:
        q = q + (1.0 - theta) * apply_operator(lower, centre, upper, u_prev)
    q = q.copy()
    q[0] += theta * lower[0] * bc_next[0]
    q[-1] += theta * upper[-1] * bc_next[1]
    return TimeStepSystem(sub, diag, sup, q)


def assemble_step(coeffs: CoefficientSet, grid: GridSpec, u_prev, n: int, theta: float = 1.0,
                  bc_next=(0.0, 0.0)) -> TimeStepSystem:
    """System advancing the full slice ``u_prev`` from level ``n`` to ``n + 1``.

    Coefficients and ``f`` are frozen at time ``t_n + theta tau``; ``bc_next``
    holds the Dirichlet values at level ``n + 1``.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != (grid.nx,):
        raise ValueError(f"u_prev must have {grid.nx} entries")
    x = grid.x
    t_star = grid.t_min + (n + theta) * grid.tau
    co = coeffs.at(x[1:-1], t_star)
    sys_ = _assemble(co["a"], co["b"], co["c"], co["f"], grid.h, grid.tau, theta,
                     u_prev, bc_next, x, n)
    sys_.meta = {"level": n, "theta": theta, "tau": grid.tau, "h": grid.h}
    return sys_


@njit(cache=True)
def _psor_kernel(sub, diag, sup, q, U, omega, tol, max_iter):
    n = diag.shape[0]
    worst = np.inf
    for it in range(1, max_iter + 1):
        for i in range(n):
            s = q[i]
            if i > 0:
                s -= sub[i] * U[i - 1]
            if i < n - 1:
                s -= sup[i] * U[i + 1]
            y = U[i] + omega * (s / diag[i] - U[i])
            U[i] = y if y > 0.0 else 0.0
        worst = 0.0
        for i in range(n):
            r = diag[i] * U[i] - q[i]
            if i > 0:
                r += sub[i] * U[i - 1]
            if i < n - 1:
                r += sup[i] * U[i + 1]
            m = U[i] if U[i] < r else r
            if m < 0.0:
                m = -m
            if m > worst:
                worst = m
        if worst <= tol:
            return it, worst
    return -1, worst


def psor_solve(sys_: TimeStepSystem, cfg: SolveConfig = SolveConfig(), x0=None):
    """Projected SOR in ascending index order.

    Returns ``(U, sweeps)`` with ``U >= 0`` and ``|min(U_i, r_i)| <= tol``.
    """
    diag = np.ascontiguousarray(sys_.diag, dtype=float)
    U = np.zeros_like(diag) if x0 is None else np.maximum(np.array(x0, dtype=float), 0.0)
    iters, worst = _psor_kernel(np.ascontiguousarray(sys_.sub, dtype=float), diag,
                                np.ascontiguousarray(sys_.sup, dtype=float),
                                np.ascontiguousarray(sys_.q, dtype=float), U,
                                float(cfg.omega), float(cfg.tol), int(cfg.max_iter))
    if iters < 0:
        raise NonConvergenceError(
            f"PSOR did not converge in {cfg.max_iter} sweeps "
            f"(complementarity residual {worst:.3e} > tol {cfg.tol:.1e})",
            residual=float(worst), level=sys_.meta.get("level"))
    return U, int(iters)


def _boundary_values(data, x, t) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(data(x, t), dtype=float), np.broadcast(x, t).shape)
    return np.array(vals, dtype=float)


def _clamp(vals: np.ndarray, tol: float, what: str) -> np.ndarray:
    if not np.all(np.isfinite(vals)):
        raise ObstacleError(f"{what} data is not finite")
    low = vals.min()
    if low < -tol:
        raise ObstacleError(f"{what} data is negative ({low:.3e}); obstacle data must be >= 0")
    if low < 0:
        logger.warning("%s data clamped to 0 (min %.3e within tolerance)", what, low)
        vals = np.maximum(vals, 0.0)
    return vals


def solve_arrays(grid: GridSpec, a, b, c, f, u0, left, right,
                 cfg: SolveConfig = SolveConfig()) -> Field:
    """March the LCP with coefficient arrays already evaluated.

    ``a, b, c, f`` have shape ``(nt - 1, nx - 2)`` (interior nodes at the
    ``n + theta`` levels) or broadcast to it; ``u0`` has ``nx`` entries and
    ``left``/``right`` have ``nt`` entries.
    """
    nt, nx = grid.nt, grid.nx
    shape = (nt - 1, nx - 2)
    a, b, c, f = (np.broadcast_to(np.asarray(v, dtype=float), shape) for v in (a, b, c, f))
    out = np.empty((nt, nx))
    out[0] = u0
    out[:, 0] = left
    out[:, -1] = right
    out[0] = u0
    total = 0
    worst = 0.0
    theta = cfg.theta
    h, tau = grid.h, grid.tau
    x = grid.x
    for n in range(nt - 1):
        sys_ = _assemble(a[n], b[n], c[n], f[n], h, tau, theta, out[n],
                         (left[n + 1], right[n + 1]), x, n)
        sys_.meta = {"level": n, "theta": theta, "tau": tau, "h": h}
        U, it = psor_solve(sys_, cfg, x0=out[n, 1:-1])
        out[n + 1, 1:-1] = U
        total += it
        r = sys_.residual(U)
        worst = max(worst, float(np.max(np.abs(np.minimum(U, r)))))
    return Field(grid, out, obstacle=True,
                 meta={"sweeps": total, "complementarity_residual": worst})


def solve_parabolic(coeffs: CoefficientSet, grid: GridSpec, initial: Callable,
                    left: Callable, right: Callable,
                    cfg: SolveConfig = SolveConfig()) -> Field:
    """Solve the obstacle problem on ``grid`` with Dirichlet data.

    ``initial``, ``left`` and ``right`` are vectorised callables of ``(x, t)``
    (expression trees qualify).  Returns a non-negative :class:`Field` whose
    interior complementarity residual is within ``cfg.tol``.
    """
    require_valid(coeffs, grid)
    x, t = grid.x, grid.t
    u0 = _clamp(_boundary_values(initial, x, grid.t_min), cfg.tol, "initial")
    lv = _clamp(_boundary_values(left, grid.x_min, t), cfg.tol, "left boundary")
    rv = _clamp(_boundary_values(right, grid.x_max, t), cfg.tol, "right boundary")
    lv[0], rv[0] = u0[0], u0[-1]
    X, T = np.meshgrid(x[1:-1], t[:-1] + cfg.theta * grid.tau)
    co = coeffs.at(X, T)
    try:
        return solve_arrays(grid, co["a"], co["b"], co["c"], co["f"], u0, lv, rv, cfg)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"{exc} at time level {exc.level}",
                                  exc.residual, exc.level) from exc
