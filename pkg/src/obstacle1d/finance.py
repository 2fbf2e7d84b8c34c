"""American put pricing as an obstacle problem in log-price.

With ``y = ln s``, forward time ``t`` = time to maturity, payoff
``psi = max(0, K - e^y)`` and ``u = p - psi``::

    a u_yy + b u_y + c u - u_t = f 1{u>0},   u >= 0
    a = sigma^2 / 2,  b = r - sigma^2 / 2,  c = -r,  f = r K on {e^y < K}

The computational box stops short of the strike, where ``f`` would drop to
zero.  Its right-edge data come from a finer reference solve on a domain
extended far out of the money, closed by the European price.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .classifier import SmoothFitReport, smoothfit_report
from .coefficients import CoefficientSet, validate
from .errors import HypothesisViolation
from .expr import as_expr, evaluate, parse_expression
from .free_boundary import SPATIAL, FreeBoundarySet, extract
from .grid_field import Field, GridSpec
from .lcp import SolveConfig, operator_bands, solve_arrays


@dataclass(frozen=True)
class PutScenario:
    K: float = 1.0
    r: float = 0.05
    sigma: float | str = 0.3
    T: float = 1.0
    s_min: float = 0.2
    margin: float = 0.02
    h: float = 0.01
    tau: float = 1e-3
    # reference solve: refinement factor and how far (in units of sigma sqrt(T))
    # the extended domain reaches above the strike
    ref_factor: int = 2
    ref_reach: float = 6.0

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise ValueError("strike K must be positive")
        if not self.T > 0:
            raise ValueError("maturity T must be positive")
        if self.r < 0:
            raise ValueError("rate r must be non-negative")
        if self.r == 0:
            raise HypothesisViolation(
                "r = 0 makes f = rK vanish, violating the non-degeneracy hypothesis f >= delta > 0")
        if isinstance(self.sigma, (int, float)) and not self.sigma > 0:
            raise ValueError("volatility sigma must be positive")
        if not 0 < self.s_min < self.K * (1 - self.margin):
            raise ValueError("need 0 < s_min < K (1 - margin)")
        if not 0 < self.margin < 1:
            raise ValueError("margin must lie in (0, 1)")

    @property
    def y_min(self) -> float:
        return math.log(self.s_min)

    @property
    def y_max(self) -> float:
        return math.log(self.K * (1 - self.margin))

    @property
    def sigma_expr(self):
        return as_expr(parse_expression(self.sigma) if isinstance(self.sigma, str) else self.sigma)

    @property
    def sigma_scale(self) -> float:
        """Representative volatility (the constant, or the sup over the box)."""
        if isinstance(self.sigma, (int, float)):
            return float(self.sigma)
        g = self.grid()
        X, T = g.mesh()
        return float(np.max(np.abs(evaluate(self.sigma_expr, X, T))))

    def grid(self) -> GridSpec:
        nx = max(int(round((self.y_max - self.y_min) / self.h)), 2) + 1
        nt = max(int(round(self.T / self.tau)), 1) + 1
        return GridSpec(self.y_min, self.y_max, 0.0, self.T, nx, nt)

    def perpetual_boundary(self) -> float:
        """``s* = 2 r K / (2 r + sigma^2)`` (constant volatility only)."""
        return 2 * self.r * self.K / (2 * self.r + self.sigma_scale ** 2)


def coefficients(scn: PutScenario) -> CoefficientSet:
    """Log-price coefficients with ``delta = min(r K, sigma^2 / 2) / 2``."""
    sig = scn.sigma_expr
    s = repr(float(scn.sigma)) if isinstance(scn.sigma, (int, float)) else f"({scn.sigma})"
    a = f"0.5*{s}^2"
    b = f"{scn.r!r} - 0.5*{s}^2"
    amin = 0.5 * scn.sigma_scale ** 2
    if not isinstance(scn.sigma, (int, float)):
        g = scn.grid()
        X, T = g.mesh()
        amin = float(np.min(0.5 * evaluate(sig, X, T) ** 2))
    delta = 0.5 * min(scn.r * scn.K, amin)
    return CoefficientSet(a, b, repr(-scn.r), repr(scn.r * scn.K), delta)


def payoff(scn: PutScenario, y) -> np.ndarray:
    return np.maximum(scn.K - np.exp(y), 0.0)


def european_put(scn: PutScenario, s, t) -> np.ndarray:
    """Black-Scholes European put at spot ``s`` with time to maturity ``t`` (constant sigma)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    sig = scn.sigma_scale
    out = np.array(np.broadcast_to(np.maximum(scn.K - s, 0.0), np.broadcast(s, t).shape), dtype=float)
    pos = np.broadcast_to(t > 0, out.shape)
    if pos.any():
        sb, tb = np.broadcast_arrays(s, t)
        ss, tt = sb[pos], tb[pos]
        d1 = (np.log(ss / scn.K) + (scn.r + 0.5 * sig * sig) * tt) / (sig * np.sqrt(tt))
        d2 = d1 - sig * np.sqrt(tt)
        out[pos] = scn.K * np.exp(-scn.r * tt) * norm.cdf(-d2) - ss * norm.cdf(-d1)
    return out


def _coefficient_arrays(scn: PutScenario, grid: GridSpec, theta: float):
    y = grid.x[1:-1]
    tt = grid.t[:-1] + theta * grid.tau
    Y, TT = np.meshgrid(y, tt)
    sig = np.broadcast_to(evaluate(scn.sigma_expr, Y, TT), Y.shape)
    a = 0.5 * sig * sig
    b = scn.r - a
    c = np.full_like(a, -scn.r)
    return a, b, c


def reference_solve(scn: PutScenario, cfg: SolveConfig = SolveConfig()) -> Field:
    """Fine solve on ``[y_min, ln K + reach sigma sqrt(T)]``.

    ``f = -(L_h psi)`` node by node, so the kink of the payoff at the strike
    enters as the discrete measure it is.  The far edge carries the
    European value, the near edge ``u = 0``.  Nodes of the returned grid
    include every node of :meth:`PutScenario.grid`.
    """
    g = scn.grid()
    k = int(scn.ref_factor)
    h = g.h / k
    extra = int(math.ceil((math.log(scn.K) + scn.ref_reach * scn.sigma_scale * math.sqrt(scn.T)
                           - g.x_max) / h))
    nx = (g.nx - 1) * k + 1 + max(extra, 4)
    nt = (g.nt - 1) * k + 1
    ref = GridSpec(g.x_min, g.x_min + (nx - 1) * h, 0.0, scn.T, nx, nt)
    a, b, c = _coefficient_arrays(scn, ref, cfg.theta)
    lower, centre, upper = operator_bands(a, b, c, ref.h)
    psi = payoff(scn, ref.x)
    f = -(lower * psi[:-2] + centre * psi[1:-1] + upper * psi[2:])
    s_far = math.exp(ref.x_max)
    right = european_put(scn, s_far, ref.t) - payoff(scn, ref.x_max)
    left = np.zeros(nt)
    out = solve_arrays(ref, a, b, c, f, np.zeros(nx), left, np.maximum(right, 0.0), cfg)
    return Field(ref, out.values, obstacle=True, meta=dict(out.meta, factor=k))


@dataclass
class ObstacleSetup:
    coeffs: CoefficientSet
    grid: GridSpec
    initial: object
    left: object
    right: np.ndarray
    reference: Field | None = None


def to_obstacle(scn: PutScenario, cfg: SolveConfig = SolveConfig()) -> ObstacleSetup:
    """Coefficients, grid and data of the transformed problem on the restricted box."""
    coeffs = coefficients(scn)
    g = scn.grid()
    rep = validate(coeffs, g)
    if not rep.passed:
        raise HypothesisViolation("; ".join(rep.messages()))
    ref = reference_solve(scn, cfg)
    k = ref.meta["factor"]
    right = ref.values[::k, (g.nx - 1) * k].copy()
    zero = as_expr(0.0)
    return ObstacleSetup(coeffs, g, zero, zero, right, ref)


def solve_put(scn: PutScenario, cfg: SolveConfig = SolveConfig()) -> tuple[Field, ObstacleSetup]:
    setup = to_obstacle(scn, cfg)
    g = setup.grid
    a, b, c = _coefficient_arrays(scn, g, cfg.theta)
    f = np.full_like(a, scn.r * scn.K)
    u = solve_arrays(g, a, b, c, f, np.zeros(g.nx), np.zeros(g.nt), setup.right, cfg)
    return u, setup


def price(scn: PutScenario, u: Field) -> np.ndarray:
    """American put ``p = u + psi`` on the grid, shape ``(nt, nx)``."""
    return u.values + payoff(scn, u.grid.x)[None, :]


@dataclass
class ExerciseReport:
    scenario: PutScenario
    times: np.ndarray
    s_star: np.ndarray
    jumps: np.ndarray
    monotone: bool
    perpetual: float
    long_time_error: float
    min_ut: float
    price_monotone: bool
    smoothfit: SmoothFitReport
    window_start: float = 0.0
    gamma: FreeBoundarySet = field(repr=False, default=None)

    def max_jump_after(self, t_lo: float) -> float:
        sel = (self.times >= t_lo) & np.isfinite(self.jumps)
        return float(self.jumps[sel].max()) if sel.any() else math.nan

    @property
    def max_jump(self) -> float:
        """Largest boundary jump outside the initial layer ``tau < window_start``."""
        return self.max_jump_after(self.window_start)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "s_star", "ut_jump"])
            for t, s, j in zip(self.times, self.s_star, self.jumps):
                w.writerow([f"{t:.17g}", f"{s:.17g}", f"{j:.17g}"])
        return path


def exercise_boundary_report(scn: PutScenario, cfg: SolveConfig = SolveConfig(),
                             u: Field | None = None, setup: ObstacleSetup | None = None,
                             window: float = 0.1) -> ExerciseReport:
    """Exercise boundary ``s*(tau)``, its ``u_t`` jumps and sanity checks.

    The boundary at each time level is the right-most spatial transition
    with exercise on its left.  ``long_time_error`` is the relative gap of
    the final level to the perpetual boundary.  ``max_jump`` skips the
    initial layer ``tau < window * T``, where the zero initial datum makes
    ``u_t`` blow up like ``tau^(-1/2)``.
    """
    if u is None:
        u, setup = solve_put(scn, cfg)
    coeffs = setup.coeffs if setup is not None else coefficients(scn)
    gamma = extract(u, coeffs)
    front = {}
    for p in gamma.points:
        if p.orientation == SPATIAL and p.side == 1:
            n = int(round(p.t / u.grid.tau))
            if n not in front or p.x > front[n].x:
                front[n] = p
    levels = sorted(front)
    pts = [front[n] for n in levels]
    boundary = FreeBoundarySet(pts, gamma.zero_tol)
    sf = smoothfit_report(u, coeffs, boundary)
    jumps = np.array([pj.jumps[-1] for pj in sf.points])
    times = np.array([p.t for p in pts])
    s_star = np.exp(np.array([p.x for p in pts]))
    monotone = bool(np.all(np.diff(s_star) <= u.grid.h * s_star[1:])) if s_star.size > 1 else True
    perp = scn.perpetual_boundary()
    err = abs(s_star[-1] - perp) / perp if s_star.size else math.nan
    p = price(scn, u)
    price_monotone = bool(np.all(np.diff(p, axis=1) <= 1e-10))
    return ExerciseReport(scn, times, s_star, jumps, monotone, perp, err,
                          float(u.derived[0].values.min()), price_monotone, sf,
                          window * scn.T, boundary)
