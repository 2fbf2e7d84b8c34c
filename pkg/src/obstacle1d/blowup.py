"""Parabolic blow-ups ``u(x0 + eps x, t0 + eps^2 t) / eps^2`` at free-boundary points.

A ladder of decreasing ``eps`` is mapped onto one fixed reference box; for
each rung the homogeneity defect and the best match in the family of
homogeneous solutions are recorded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .closed_forms import VFamily, VMinus, VPlus
from .coefficients import CoefficientSet
from .energetics import heat_kernel, l2g_distance
from .errors import AdmissibilityError, DegenerateLimitError
from .free_boundary import SPATIAL, extract
from .grid_field import Field, GridSpec, sample
from .lcp import SolveConfig, solve_parabolic

# Reference box of the rescaled fields: wide enough in x for the Gaussian
# weight at t = -1 (std sqrt(2)), ending at t = 0.
DEFAULT_REF_BOX = GridSpec(-4.0, 4.0, -1.0, 0.0, 161, 101)
M_GRID_POINTS = 101


def _point(P0) -> tuple[float, float]:
    return (float(P0.x), float(P0.t)) if hasattr(P0, "orientation") else (float(P0[0]), float(P0[1]))


def max_admissible_eps(grid: GridSpec, P0, ref_box: GridSpec = DEFAULT_REF_BOX,
                       x_scale: float = 1.0) -> float:
    """Largest ``eps`` whose image of ``ref_box`` about ``P0`` stays in ``grid``."""
    x0, t0 = _point(P0)
    lim = [math.inf]
    if ref_box.x_min < 0:
        lim.append((x0 - grid.x_min) / (-ref_box.x_min * x_scale))
    if ref_box.x_max > 0:
        lim.append((grid.x_max - x0) / (ref_box.x_max * x_scale))
    if ref_box.t_min < 0:
        lim.append(math.sqrt(max(t0 - grid.t_min, 0.0) / -ref_box.t_min))
    if ref_box.t_max > 0:
        lim.append(math.sqrt(max(grid.t_max - t0, 0.0) / ref_box.t_max))
    return min(lim)


def rescale(u, P0, eps: float, ref_box: GridSpec = DEFAULT_REF_BOX) -> Field:
    """Nodal values of ``u(x0 + eps x, t0 + eps^2 t) / eps^2`` on ``ref_box``.

    ``u`` is a :class:`Field` (interpolated) or a closed form (evaluated).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    x0, t0 = _point(P0)
    X, T = ref_box.mesh()
    xs, ts = x0 + eps * X, t0 + eps * eps * T
    if isinstance(u, Field):
        limit = max_admissible_eps(u.grid, (x0, t0), ref_box)
        if eps > limit * (1 + 1e-9):
            raise AdmissibilityError(
                f"eps={eps} maps the reference box outside the data box; max admissible eps is {limit:.6g}",
                limit=limit)
        vals = sample(u, xs, ts)
    else:
        vals = u.value(xs, ts)
    return Field(ref_box, np.asarray(vals) / (eps * eps), meta={"eps": eps, "P0": (x0, t0)})


def refine_local(coeffs: CoefficientSet, u: Field, P0, eps: float, factor: int = 2,
                 ref_box: GridSpec = DEFAULT_REF_BOX, cfg: SolveConfig = SolveConfig(),
                 x_scale: float = 1.0) -> Field:
    """Re-solve on the parent-node box covering the ``eps``-image of ``ref_box``.

    The fine grid has ``factor`` times the parent resolution in x and t, and
    takes initial and Dirichlet data by sampling ``u``.  One spare parent
    cell is kept on each side where the data box allows.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    g = u.grid
    x0, t0 = _point(P0)
    limit = max_admissible_eps(g, (x0, t0), ref_box, x_scale)
    if eps > limit * (1 + 1e-9):
        raise AdmissibilityError(
            f"eps={eps} needs data outside the parent box; max admissible eps is {limit:.6g}", limit=limit)
    xa, xb = x0 + x_scale * eps * ref_box.x_min, x0 + x_scale * eps * ref_box.x_max
    ta, tb = t0 + eps * eps * ref_box.t_min, t0 + eps * eps * ref_box.t_max
    i_lo = max(int(math.floor((xa - g.x_min) / g.h + 1e-9)) - 1, 0)
    i_hi = min(int(math.ceil((xb - g.x_min) / g.h - 1e-9)) + 1, g.nx - 1)
    n_lo = max(int(math.floor((ta - g.t_min) / g.tau + 1e-9)) - 1, 0)
    n_hi = min(int(math.ceil((tb - g.t_min) / g.tau - 1e-9)) + 1, g.nt - 1)
    n_hi = max(n_hi, n_lo + 1)
    fine = GridSpec(g.x[i_lo], g.x[i_hi], g.t[n_lo], g.t[n_hi],
                    (i_hi - i_lo) * factor + 1, (n_hi - n_lo) * factor + 1)

    def data(x, t):
        return np.maximum(sample(u, x, t), 0.0)

    out = solve_parabolic(coeffs, fine, data, data, data, cfg)
    meta = dict(out.meta, parent_nodes=(i_lo, i_hi, n_lo, n_hi), factor=factor)
    return Field(fine, out.values, obstacle=True, meta=meta)


def restriction_error(fine: Field, parent: Field) -> float:
    """Max difference between ``fine`` at coarse nodes and ``parent``."""
    i_lo, i_hi, n_lo, n_hi = fine.meta["parent_nodes"]
    k = fine.meta["factor"]
    return float(np.max(np.abs(fine.values[::k, ::k] - parent.values[n_lo:n_hi + 1, i_lo:i_hi + 1])))


def homogeneity_defect(u: Field) -> float:
    """``int int_{t<0} |Lu|^2 G dx dt`` over the box, ``Lu = -2u + x u_x + 2t u_t``."""
    g = u.grid
    rows = np.flatnonzero(g.t < -1e-12 * g.tau)
    if rows.size < 2:
        return 0.0
    ut, ux, _ = u.derived
    X, T = g.mesh()
    X, T = X[rows], T[rows]
    Lu = -2 * u.values[rows] + X * ux.values[rows] + 2 * T * ut.values[rows]
    inner = simpson(Lu * Lu * heat_kernel(X, T), x=g.x, axis=1)
    return float(max(simpson(inner, x=g.t[rows]), 0.0))


class ProfileMatch(NamedTuple):
    label: str
    m_hat: float
    distance: float


def match_profile(u0, t: float = -1.0, m_points: int = M_GRID_POINTS) -> ProfileMatch:
    """Closest of ``v_plus``, ``v_minus`` and ``v_m`` (``m`` in [-1, 0]) in ``L^2(G)`` at ``t``.

    The ``v_m`` scan uses ``m_points`` equispaced values, then a bounded
    Brent refinement around the best one.  Raises
    :class:`DegenerateLimitError` when ``u0`` vanishes identically.
    """
    if isinstance(u0, Field) and not np.any(np.abs(u0.values) > 1e-300):
        raise DegenerateLimitError("blow-up limit vanishes identically; no homogeneous match exists")
    dist = {"v_plus": l2g_distance(u0, VPlus(), t=t), "v_minus": l2g_distance(u0, VMinus(), t=t)}

    def d_m(m: float) -> float:
        return l2g_distance(u0, VFamily(float(np.clip(m, -1.0, 0.0))), t=t)

    ms = np.linspace(-1.0, 0.0, m_points)
    dm = np.array([d_m(m) for m in ms])
    k = int(np.argmin(dm))
    m_best, d_best = float(ms[k]), float(dm[k])
    step = ms[1] - ms[0]
    lo, hi = max(m_best - step, -1.0), min(m_best + step, 0.0)
    res = minimize_scalar(d_m, bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    if res.fun < d_best:
        m_best, d_best = float(res.x), float(res.fun)
    label = min(dist, key=dist.get)
    if d_best < dist[label]:
        return ProfileMatch("v_m", m_best, d_best)
    return ProfileMatch(label, math.nan, dist[label])


@dataclass
class LadderEntry:
    eps: float
    defect: float
    label: str
    m_hat: float
    distance: float
    sup_abs: float
    origin_value: float
    P0: tuple


@dataclass
class BlowupLadder:
    P0: tuple
    entries: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    @property
    def epsilons(self) -> list:
        return [e.eps for e in self.entries]

    @property
    def defects(self) -> list:
        return [e.defect for e in self.entries]

    def labels_consistent(self, defect_tol: float = 0.01) -> bool:
        """Labels agree among rungs whose defect is below ``defect_tol``."""
        labs = {e.label for e in self.entries if e.defect < defect_tol}
        return len(labs) <= 1

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "defect", "label", "m_hat", "distance"])
            for e in self.entries:
                w.writerow([f"{e.eps:.17g}", f"{e.defect:.17g}", e.label,
                            f"{e.m_hat:.17g}", f"{e.distance:.17g}"])
        return path


def _recentre(fine: Field, P0, coeffs: CoefficientSet | None, max_shift: float):
    """Nearest spatial Gamma point of ``fine`` at the time level of ``P0``."""
    x0, t0 = P0
    pts = [p for p in extract(fine, coeffs)
           if p.orientation == SPATIAL and abs(p.t - t0) <= 0.5 * fine.grid.tau]
    if not pts:
        return P0
    best = min(pts, key=lambda p: abs(p.x - x0))
    if abs(best.x - x0) > max_shift:
        return P0
    return (best.x, t0)


def blowup_ladder(u, P0, epsilons: Sequence[float] = (0.4, 0.2, 0.1),
                  ref_box: GridSpec = DEFAULT_REF_BOX, coeffs: CoefficientSet | None = None,
                  factor: int | None = None, cfg: SolveConfig = SolveConfig(),
                  keep_fields: bool = False) -> BlowupLadder:
    """Blow-ups of ``u`` at ``P0`` for each ``eps`` (sorted decreasing).

    With ``coeffs`` the field is first normalised at ``P0`` (coefficients
    frozen there, see :func:`~obstacle1d.classifier.normalize_at`).  With
    ``factor`` as well, each rung is re-solved locally at ``factor`` times
    the parent resolution and re-centred on the fine free boundary before
    normalising.
    """
    from .classifier import normalize_at

    P0 = _point(P0)
    x_scale = 1.0
    if coeffs is not None:
        x_scale = math.sqrt(float(coeffs.a(P0[0], P0[1])))
    ladder = BlowupLadder(P0)
    for eps in sorted((float(e) for e in epsilons), reverse=True):
        src, centre = u, P0
        if factor is not None and isinstance(u, Field):
            if coeffs is None:
                raise ValueError("local refinement needs the coefficient set")
            src = refine_local(coeffs, u, P0, eps, factor, ref_box, cfg, x_scale)
            centre = _recentre(src, P0, coeffs, u.grid.h)
        if coeffs is not None and isinstance(src, Field):
            src = normalize_at(src, coeffs, centre)
            ue = rescale(src, (0.0, 0.0), eps, ref_box)
        else:
            ue = rescale(src, centre, eps, ref_box)
        match = match_profile(ue)
        i0, n0 = ref_box.nearest_index(0.0, 0.0)
        ladder.entries.append(LadderEntry(
            eps, homogeneity_defect(ue), match.label, match.m_hat, match.distance,
            float(np.max(np.abs(ue.values))), float(ue.values[n0, i0]), centre))
        if keep_fields:
            ladder.fields.append(ue)
    return ladder
