"""Regular/singular classification of free-boundary points and smooth-fit reports.

A point is labelled by the limit ``E(0-)`` of the energy about it, compared
with the values calibrated on ``v_plus`` (regular) and ``v_0`` (singular).
Singular points get an ``m`` estimate from two independent probes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .coefficients import CoefficientSet
from .energetics import calibration, energy_trace, phi
from .errors import AdmissibilityError, HypothesisViolation
from .free_boundary import (FreeBoundaryPoint, FreeBoundarySet, LiminfCheck, _UtProbe,
                            default_zero_tol, liminf_ut_check, min_radius, ut_jump)
from .grid_field import Field

REGULAR = "regular"
SINGULAR = "singular"
UNRESOLVED = "unresolved"

# Half-width of the ambiguity band around the midpoint of the calibrated values,
# as a fraction of the midpoint.
AMBIGUITY = 0.10
# Largest allowed disagreement between the two m estimators.
M_AGREEMENT = 0.10
THETA_JUMP = 0.10


def _point(P0) -> tuple[float, float]:
    if isinstance(P0, FreeBoundaryPoint):
        return P0.x, P0.t
    return float(P0[0]), float(P0[1])


def normalize_at(u: Field, coeffs: CoefficientSet | None, P0) -> Field:
    """``u(x0 + sqrt(a0) x, t0 + t) / f0`` with ``a0, f0`` frozen at ``P0``.

    The result lives on the affinely relabelled grid (``P0`` at the origin)
    and records ``a0``, ``f0`` and the sup-norm drift of the normalised
    coefficients over the box in ``meta``.
    """
    x0, t0 = _point(P0)
    g = u.grid
    if not (g.x_min < x0 < g.x_max and g.t_min < t0 <= g.t_max + 1e-12 * g.tau):
        raise AdmissibilityError(f"point ({x0:.6g}, {t0:.6g}) is not inside the box interior")
    if min(x0 - g.x_min, g.x_max - x0) < 2 * g.h or t0 - g.t_min < 2 * g.tau:
        raise AdmissibilityError(
            f"admissible box around ({x0:.6g}, {t0:.6g}) is narrower than two cells", limit=0.0)
    if coeffs is None:
        return Field(g.shifted(x0, t0), u.values, meta={"a0": 1.0, "f0": 1.0, "drift": {}})
    co = {k: float(v) for k, v in coeffs.at(x0, t0).items()}
    a0, f0 = co["a"], co["f"]
    if a0 < coeffs.delta or f0 < coeffs.delta:
        raise HypothesisViolation(f"a(P0)={a0:.6g}, f(P0)={f0:.6g} below delta={coeffs.delta:.6g}")
    vals = coeffs.on_grid(g)
    drift = {
        "a": float(np.max(np.abs(vals["a"] / a0 - 1.0))),
        "f": float(np.max(np.abs(vals["f"] / f0 - 1.0))),
        "b": float(np.max(np.abs(vals["b"]))) / math.sqrt(a0),
        "c": float(np.max(np.abs(vals["c"]))),
    }
    return Field(g.shifted(x0, t0, math.sqrt(a0)), u.values / f0,
                 meta={"a0": a0, "f0": f0, "drift": drift})


def default_eps_ladder(un: Field, count: int = 16) -> list:
    """Geometric ladder (ratio ``2^(-1/4)``) for a normalised field.

    Starts at a third of the box half-width (the energy trace discards
    rungs whose truncation tail is too large) and stops at four cells
    or one time step.
    """
    g = un.grid
    half = min(-g.x_min, g.x_max)
    top = min(half / 3.0, math.sqrt(max(-g.t_min, 0.0)))
    floor = max(4.0 * g.h, math.sqrt(g.tau))
    out = []
    e = top
    while len(out) < count and e >= floor:
        out.append(e)
        e *= 2.0 ** -0.25
    return out


def trace_times(un: Field, eps_ladder: Sequence[float]) -> list:
    """Offsets ``-eps^2`` snapped to time levels of ``un`` (at least one level back).

    Snapping keeps the energy slabs off time interpolation, which would mix
    values across a kink in t.
    """
    g = un.grid
    out = set()
    for e in eps_ladder:
        n = int(round((-e * e - g.t_min) / g.tau))
        t = g.t_min + n * g.tau
        if t < -0.5 * g.tau and n >= 0:
            out.add(t)
    return sorted(out)


def ut_probe(un: Field, depth: float) -> float:
    """Median one-sided ``u_t`` at the origin column over ``t`` in ``[-depth, 0]``."""
    g = un.grid
    i0, _ = g.nearest_index(0.0, 0.0)
    ut = un.derived[0].values[:, i0]
    sel = (g.t <= 0.5 * g.tau) & (g.t >= -max(depth, 2 * g.tau)) & (np.arange(g.nt) > 0)
    if not sel.any():
        return math.nan
    return float(np.median(ut[sel]))


def estimate_m(un: Field, t: float) -> float:
    """``argmin_m Phi^{v_m}(t; un)`` over ``[-1, 0]``."""
    res = minimize_scalar(lambda m: phi(un, (0.0, 0.0), float(m), t).value,
                          bounds=(-1.0, 0.0), method="bounded", options={"xatol": 1e-6})
    m = float(res.x)
    # the bounded search never lands on the end points; compare them explicitly
    ends = {-1.0: phi(un, (0.0, 0.0), -1.0, t).value, 0.0: phi(un, (0.0, 0.0), 0.0, t).value}
    best = min(ends, key=ends.get)
    return best if ends[best] <= res.fun else m


@dataclass
class PointDiagnosis:
    point: tuple
    E0: float
    label: str
    m_hat: float = math.nan
    m_probe: float = math.nan
    radii: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    phi_monotone: bool | None = None
    liminf: LiminfCheck | None = None
    flags: list = field(default_factory=list)
    trace: object = None


def _jump_ladder(u: Field, P0, radii, probe) -> list:
    out = []
    for r in radii:
        try:
            out.append(ut_jump(u, P0, r, probe=probe).jump)
        except (AdmissibilityError, ValueError):
            out.append(math.nan)
    return out


def default_radii(u: Field) -> list:
    r0 = min_radius(u)
    return [4 * r0, 2 * r0, r0]


def classify_point(u: Field, coeffs: CoefficientSet | None, P0,
                   eps_ladder: Sequence[float] | None = None,
                   radii: Sequence[float] | None = None,
                   monotone_tol: float = 1e-4) -> PointDiagnosis:
    """Diagnose one free-boundary point.

    The energy about the normalised point is traced at ``t = -eps^2``, which
    by parabolic scaling equals ``E(-1)`` of the ``eps`` blow-up.  The
    extrapolated ``E0`` picks the nearer calibrated value unless it falls in
    the ambiguity band, which yields ``unresolved``.
    """
    x0, t0 = _point(P0)
    un = normalize_at(u, coeffs, (x0, t0))
    if eps_ladder is None:
        eps_ladder = default_eps_ladder(un)
    radii = list(default_radii(u) if radii is None else radii)
    zt = default_zero_tol(u, coeffs)
    probe = _UtProbe(u, zt)
    diag = PointDiagnosis((x0, t0), math.nan, UNRESOLVED, radii=radii,
                          jumps=_jump_ladder(u, (x0, t0), radii, probe))
    diag.liminf = liminf_ut_check(u, (x0, t0), zero_tol=zt)
    if not diag.liminf.passed:
        diag.flags.append("liminf_failed")
    try:
        trace = energy_trace(un, (0.0, 0.0), trace_times(un, eps_ladder))
    except AdmissibilityError:
        diag.flags.append("insufficient_trace")
        return diag
    diag.trace = trace
    diag.E0 = trace.E0
    e_reg, e_sing = calibration()
    mid = 0.5 * (e_reg + e_sing)
    if abs(trace.E0 - mid) <= AMBIGUITY * mid:
        diag.flags.append("ambiguous_energy")
        return diag
    if abs(trace.E0 - e_reg) < abs(trace.E0 - e_sing):
        diag.label = REGULAR
        return diag
    diag.label = SINGULAR
    good = trace.admissible()
    t_small = max(r.t for r in good)
    diag.m_hat = estimate_m(un, t_small)
    diag.m_probe = ut_probe(un, -t_small)
    if not (abs(diag.m_hat - diag.m_probe) <= M_AGREEMENT):
        diag.flags.append("m_mismatch")
    vals = [phi(un, (0.0, 0.0), diag.m_hat, r.t).value for r in good]
    scale = max(1.0, max(abs(v) for v in vals))
    diag.phi_monotone = all(b <= a + monotone_tol * scale for a, b in zip(vals, vals[1:]))
    if not diag.phi_monotone:
        diag.flags.append("phi_not_monotone")
    return diag


def classify_boundary(u: Field, coeffs: CoefficientSet | None, gamma: FreeBoundarySet,
                      points: Sequence | None = None, **kwargs) -> list:
    """Diagnoses for ``points`` (default: all of ``gamma``), sorted by ``(t, x)``.

    Points whose neighbourhood is too small to normalise are skipped.
    """
    out = []
    for p in (gamma.points if points is None else points):
        try:
            out.append(classify_point(u, coeffs, p, **kwargs))
        except AdmissibilityError:
            continue
    out.sort(key=lambda d: (d.point[1], d.point[0]))
    return out


def write_diagnoses(diags: Sequence[PointDiagnosis], path: str | Path) -> Path:
    """Diagnosis CSV ``t,x,E0,label,m_hat,jump_r1,...,flags``."""
    path = Path(path)
    n = max((len(d.jumps) for d in diags), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "E0", "label", "m_hat"] + [f"jump_r{k + 1}" for k in range(n)] + ["flags"])
        for d in diags:
            jumps = [f"{j:.17g}" for j in d.jumps] + ["nan"] * (n - len(d.jumps))
            w.writerow([f"{d.point[1]:.17g}", f"{d.point[0]:.17g}", f"{d.E0:.17g}", d.label,
                        f"{d.m_hat:.17g}"] + jumps + [";".join(d.flags)])
    return path


def _trend(vals: Sequence[float]) -> str:
    v = [x for x in vals if np.isfinite(x)]
    if len(v) < 2:
        return "n/a"
    d = np.diff(v)
    if np.all(d <= 1e-12):
        return "decreasing" if np.any(d < -1e-12) else "flat"
    if np.all(d >= -1e-12):
        return "increasing"
    return "mixed"


@dataclass
class PointJumps:
    point: FreeBoundaryPoint
    jumps: list
    trend: str


@dataclass
class SmoothFitReport:
    radii: list
    points: list
    slice_max: dict
    nt: int
    theta_jump: float
    bad_fraction: float
    min_ut: float
    ut_nonnegative: bool
    global_max_jump: float

    @property
    def bad_slices(self) -> list:
        return sorted(n for n, v in self.slice_max.items() if v > self.theta_jump)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "orientation"] + [f"jump_r{k + 1}" for k in range(len(self.radii))]
                       + ["trend"])
            for pj in self.points:
                w.writerow([f"{pj.point.t:.17g}", f"{pj.point.x:.17g}", pj.point.orientation]
                           + [f"{j:.17g}" for j in pj.jumps] + [pj.trend])
        return path


def smoothfit_report(u: Field, coeffs: CoefficientSet | None, gamma: FreeBoundarySet,
                     radii: Sequence[float] | None = None, theta_jump: float = THETA_JUMP,
                     tol: float = 1e-6) -> SmoothFitReport:
    """``u_t`` jump ladders along ``gamma`` with per-slice and global summaries.

    The slice statistic uses the smallest radius; boxes leaving the grid
    give ``nan`` and are ignored.  ``ut_nonnegative`` is set when ``min u_t >= -tol``
    over the whole grid.
    """
    radii = sorted(default_radii(u) if radii is None else radii, reverse=True)
    probe = _UtProbe(u, gamma.zero_tol if gamma.zero_tol > 0 else default_zero_tol(u, coeffs))
    g = u.grid
    pts = []
    slice_max: dict = {}
    for p in gamma.points:
        jumps = _jump_ladder(u, p.P, radii, probe)
        pts.append(PointJumps(p, jumps, _trend(jumps)))
        j = jumps[-1]
        if np.isfinite(j):
            n = int(round((p.t - g.t_min) / g.tau))
            slice_max[n] = max(slice_max.get(n, 0.0), j)
    bad = sum(1 for v in slice_max.values() if v > theta_jump)
    min_ut = float(u.derived[0].values.min())
    finite = [v for v in slice_max.values()]
    return SmoothFitReport(radii, pts, slice_max, g.nt, theta_jump, bad / g.nt, min_ut,
                           min_ut >= -tol, max(finite) if finite else math.nan)
