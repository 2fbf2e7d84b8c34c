"""Scenario pipeline behind ``obstacle1d run``.

validate -> solve -> extract Gamma -> requested analyses -> CSVs + manifest.
Every output file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import blowup_ladder
from .classifier import (AMBIGUITY, M_AGREEMENT, REGULAR, SINGULAR, THETA_JUMP, classify_point,
                         default_eps_ladder, normalize_at, smoothfit_report, trace_times,
                         write_diagnoses)
from .closed_forms import VFamily, VMinus, VPlus, get_profile
from .coefficients import CoefficientSet, validate
from .config import ScenarioConfig
from .energetics import RADIUS_FACTOR, calibration, energy_trace
from .errors import AdmissibilityError, ConfigError, HypothesisViolation
from .finance import PutScenario, exercise_boundary_report, solve_put
from .free_boundary import SPATIAL, FreeBoundarySet, extract
from .grid_field import GridSpec, write_field_csv
from .lcp import SolveConfig, solve_parabolic

DEFAULT_MAX_POINTS = 5


def _atomic(path: Path, write) -> Path:
    """Call ``write(tmp)`` then rename ``tmp`` onto ``path``."""
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def grid_of(cfg: ScenarioConfig, defaults: dict | None = None) -> GridSpec:
    d = defaults or {}
    box = [cfg.number("grid", k, d.get(k)) for k in ("x_min", "x_max", "t_min", "t_max")]
    if cfg.has("grid", "h"):
        nx = GridSpec.from_steps(box[0], box[1], 0.0, 1.0, cfg.number("grid", "h"), 1.0).nx
    else:
        nx = cfg.number("grid", "nx", d.get("nx"), int)
    if cfg.has("grid", "tau"):
        nt = GridSpec.from_steps(0.0, 1.0, box[2], box[3], 1.0, cfg.number("grid", "tau")).nt
    else:
        nt = cfg.number("grid", "nt", d.get("nt"), int)
    return GridSpec(*box, nx, nt)


def solver_of(cfg: ScenarioConfig) -> SolveConfig:
    base = SolveConfig()
    try:
        return SolveConfig(theta=cfg.number("solver", "theta", base.theta),
                           omega=cfg.number("solver", "omega", base.omega),
                           tol=cfg.number("solver", "tol", base.tol),
                           max_iter=cfg.number("solver", "max_iter", base.max_iter, int))
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc


def coefficients_of(cfg: ScenarioConfig, grid: GridSpec) -> CoefficientSet:
    """Coefficients with ``delta`` defaulting to the smaller of ``min a`` and ``min f`` on the grid."""
    exprs = {k: cfg.expression("coefficients", k, d) for k, d in
             (("a", "1"), ("b", "0"), ("c", "0"), ("f", "1"))}
    if cfg.has("coefficients", "delta"):
        delta = cfg.number("coefficients", "delta")
    else:
        probe = CoefficientSet(exprs["a"], exprs["b"], exprs["c"], exprs["f"], 1.0)
        vals = probe.on_grid(grid)
        mins = {k: float(vals[k].min()) for k in ("a", "f")}
        delta = min(mins.values())
        if not delta > 0:
            k = min(mins, key=mins.get)
            raise HypothesisViolation(
                f"[coefficients] {k}: hypothesis {k} >= delta > 0 violated, min {k} = {mins[k]:.6g} on the grid")
    if not delta > 0:
        raise HypothesisViolation(f"[coefficients] delta: must be positive, got {delta}")
    co = CoefficientSet(exprs["a"], exprs["b"], exprs["c"], exprs["f"], delta)
    rep = validate(co, grid)
    if not rep.passed:
        keys = [k for k, ok in (("a", rep.a_ok), ("f", rep.f_ok)) if not ok]
        raise HypothesisViolation(f"[coefficients] {', '.join(keys)}: " + "; ".join(rep.messages()))
    return co


def auto_points(gamma: FreeBoundarySet, grid: GridSpec, count: int) -> list:
    """Up to ``count`` Gamma points spread over the upper half in time and the central 60% in x.

    Points closer than two time steps to the initial time are skipped.
    """
    margin = max(0.2 * (grid.x_max - grid.x_min), 2 * grid.h)
    t_lo = max(0.5 * (grid.t_min + grid.t_max), grid.t_min + 2 * grid.tau)
    cands = [p for p in gamma.points
             if p.t >= t_lo and min(p.x - grid.x_min, grid.x_max - p.x) >= margin]
    if len(cands) <= count:
        return cands
    idx = sorted(set(np.linspace(0, len(cands) - 1, count).round().astype(int)))
    return [cands[i] for i in idx]


def _snap(gamma: FreeBoundarySet, pts: list, what: str, orientation: str | None = None) -> list:
    if not pts:
        return []
    if not len(gamma):
        raise ConfigError(f"[analysis] {what}: the solution has no free boundary to snap points to")
    if orientation is not None and not gamma.of(orientation):
        orientation = None
    return [gamma.nearest(x, t, orientation) for x, t in pts]


def _points_of(cfg: ScenarioConfig, gamma: FreeBoundarySet, grid: GridSpec) -> list:
    mode = cfg.text_value("analysis", "classify", "auto")
    if mode.lower() in ("auto", "yes"):
        return auto_points(gamma, grid, cfg.number("analysis", "max_points", DEFAULT_MAX_POINTS, int))
    if mode.lower() in ("none", "no"):
        return []
    return _snap(gamma, cfg.points("analysis", "classify"), "classify")


class _Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: dict = {}

    def write(self, name: str, writer) -> Path:
        path = _atomic(self.dir / name, writer)
        self.files[name] = _sha256(path)
        return path


def _diag_summary(diags: list) -> list:
    out = []
    for d in diags:
        out.append({"x": d.point[0], "t": d.point[1], "E0": d.E0, "label": d.label,
                    "m_hat": None if math.isnan(d.m_hat) else d.m_hat,
                    "liminf_passed": bool(d.liminf.passed) if d.liminf else None,
                    "liminf_final": d.liminf.final if d.liminf else None, "flags": list(d.flags)})
    return out


def _classify(u, coeffs, pts: list) -> list:
    diags = []
    for p in pts:
        try:
            diags.append(classify_point(u, coeffs, p))
        except AdmissibilityError:
            continue
    diags.sort(key=lambda d: (d.point[1], d.point[0]))
    return diags


def _analyses(cfg: ScenarioConfig, u, coeffs, gamma: FreeBoundarySet, out: _Outputs,
              summary: dict, solver: SolveConfig) -> None:
    """Classification, energy traces and blow-up ladders shared by obstacle and put runs."""
    g = u.grid
    diags = _classify(u, coeffs, _points_of(cfg, gamma, g))
    out.write("classification.csv", lambda p: write_diagnoses(diags, p))
    summary["classified"] = _diag_summary(diags)
    summary["labels"] = {lab: sum(d.label == lab for d in diags) for lab in (REGULAR, SINGULAR, "unresolved")}

    phi_m = cfg.floats("analysis", "phi_m")
    for k, p in enumerate(_snap(gamma, cfg.points("analysis", "energy_points"), "energy_points")):
        try:
            un = normalize_at(u, coeffs, p)
            times = cfg.floats("analysis", "energy_times") or trace_times(un, default_eps_ladder(un))
            tr = energy_trace(un, (0.0, 0.0), times, phi_m=phi_m)
        except AdmissibilityError as exc:
            raise ConfigError(f"[analysis] energy_points: at ({p.x:.6g}, {p.t:.6g}): {exc}") from exc
        out.write(f"energy_{k}.csv", tr.write_csv)
        summary.setdefault("energy", []).append({"x": p.x, "t": p.t, "E0": tr.E0})

    eps = cfg.floats("analysis", "blowup_eps", "0.4, 0.2, 0.1")
    factor = cfg.number("analysis", "blowup_factor", 0, int) or None
    for k, p in enumerate(_snap(gamma, cfg.points("analysis", "blowup_points"), "blowup_points", SPATIAL)):
        try:
            lad = blowup_ladder(u, p, eps, coeffs=coeffs, factor=factor, cfg=solver)
        except AdmissibilityError as exc:
            raise ConfigError(f"[analysis] blowup_points: at ({p.x:.6g}, {p.t:.6g}): {exc}") from exc
        out.write(f"ladder_{k}.csv", lad.write_csv)
        summary.setdefault("ladders", []).append(
            {"x": p.x, "t": p.t, "defects": lad.defects, "labels": [e.label for e in lad.entries],
             "distances": [e.distance for e in lad.entries]})


def _run_obstacle(cfg: ScenarioConfig, out: _Outputs, summary: dict, tolerances: dict) -> None:
    grid = grid_of(cfg)
    coeffs = coefficients_of(cfg, grid)
    solver = solver_of(cfg)
    init = cfg.expression("initial", "u")
    left = cfg.expression("boundary", "left") if cfg.has("boundary", "left") else init
    right = cfg.expression("boundary", "right") if cfg.has("boundary", "right") else init
    u = solve_parabolic(coeffs, grid, init, left, right, solver)
    gamma = extract(u, coeffs)
    tolerances["zero_tol"] = gamma.zero_tol
    summary.update(grid=[grid.x_min, grid.x_max, grid.t_min, grid.t_max, grid.nx, grid.nt],
                   delta=coeffs.delta, sweeps=u.meta["sweeps"],
                   complementarity_residual=u.meta["complementarity_residual"], gamma_points=len(gamma))
    if cfg.flag("output", "field"):
        out.write("field.csv", lambda p: write_field_csv(u, p))
    out.write("boundary.csv", gamma.write_csv)
    if cfg.flag("analysis", "smoothfit", True):
        sf = smoothfit_report(u, coeffs, gamma)
        out.write("smoothfit.csv", sf.write_csv)
        summary["smoothfit"] = {"bad_slices": len(sf.bad_slices), "bad_fraction": sf.bad_fraction,
                                "min_ut": sf.min_ut, "min_ut_nonnegative": bool(sf.ut_nonnegative),
                                "max_jump": sf.global_max_jump}
    _analyses(cfg, u, coeffs, gamma, out, summary, solver)


def put_scenario_of(cfg: ScenarioConfig) -> PutScenario:
    base = PutScenario()
    sigma_raw = cfg.text_value("analysis", "put_sigma")
    sigma = base.sigma
    if sigma_raw is not None:
        try:
            sigma = float(sigma_raw)
        except ValueError:
            cfg.expression("analysis", "put_sigma")
            sigma = sigma_raw
    try:
        return PutScenario(K=cfg.number("analysis", "put_k", base.K), r=cfg.number("analysis", "put_r", base.r),
                           sigma=sigma, T=cfg.number("analysis", "put_t", base.T),
                           s_min=cfg.number("analysis", "put_s_min", base.s_min),
                           margin=cfg.number("analysis", "put_margin", base.margin),
                           h=cfg.number("grid", "h", base.h), tau=cfg.number("grid", "tau", base.tau),
                           ref_factor=cfg.number("analysis", "put_ref_factor", base.ref_factor, int))
    except ValueError as exc:
        raise ConfigError(f"[analysis] put scenario: {exc}") from exc


def _run_put(cfg: ScenarioConfig, out: _Outputs, summary: dict, tolerances: dict) -> None:
    scn = put_scenario_of(cfg)
    solver = solver_of(cfg)
    u, setup = solve_put(scn, solver)
    rep = exercise_boundary_report(scn, solver, u, setup)
    gamma = extract(u, setup.coeffs)
    tolerances["zero_tol"] = gamma.zero_tol
    g = u.grid
    summary.update(grid=[g.x_min, g.x_max, g.t_min, g.t_max, g.nx, g.nt], delta=setup.coeffs.delta,
                   sweeps=u.meta["sweeps"], gamma_points=len(gamma),
                   perpetual_boundary=rep.perpetual, final_boundary=float(rep.s_star[-1]),
                   long_time_error=rep.long_time_error, max_jump=rep.max_jump,
                   jump_window_start=rep.window_start, min_ut=rep.min_ut,
                   boundary_monotone=rep.monotone, price_monotone=rep.price_monotone)
    if cfg.flag("output", "field"):
        out.write("field.csv", lambda p: write_field_csv(u, p))
    out.write("exercise.csv", rep.write_csv)
    out.write("boundary.csv", gamma.write_csv)
    if cfg.flag("analysis", "smoothfit", True):
        out.write("smoothfit.csv", rep.smoothfit.write_csv)
    _analyses(cfg, u, setup.coeffs, gamma, out, summary, solver)


PORTRAIT_GRID = {"x_min": -2.0, "x_max": 2.0, "t_min": -1.0, "t_max": 1.0, "nx": 81, "nt": 41}


def _portrait_forms(cfg: ScenarioConfig) -> list:
    """The five panels: ``v_plus``, ``v_minus``, ``v_m`` for each interior ``m``, ``v_{-1}``, ``v_0``."""
    ms = cfg.floats("analysis", "portrait_m", "-0.5")
    for m in ms:
        if not -1.0 < m < 0.0:
            raise ConfigError(f"[analysis] portrait_m: {m} is not in (-1, 0)")
    forms = [("v_plus", VPlus()), ("v_minus", VMinus())]
    forms += [(f"v_m{m:g}", VFamily(m)) for m in ms]
    forms += [("v_m-1", VFamily(-1.0)), ("v_m0", VFamily(0.0))]
    return forms


def _run_portrait(cfg: ScenarioConfig, out: _Outputs, summary: dict, tolerances: dict) -> None:
    grid = grid_of(cfg, PORTRAIT_GRID)
    forms = _portrait_forms(cfg)
    X, T = grid.mesh()
    cols = [np.asarray(f.value(X, T), dtype=float) for _, f in forms]

    def write(path):
        with open(path, "w") as fh:
            fh.write("x,t," + ",".join(n for n, _ in forms) + "\n")
            for n in range(grid.nt):
                for i in range(grid.nx):
                    fh.write(f"{X[n, i]:.17g},{T[n, i]:.17g},"
                             + ",".join(f"{c[n, i]:.17g}" for c in cols) + "\n")
    out.write("portrait.csv", write)

    ms = cfg.floats("analysis", "profiles", "-0.9, -0.5, -0.1, 0")
    rows = []
    for m in ms:
        if not -1.0 < m <= 0.0:
            raise ConfigError(f"[analysis] profiles: {m} is not in (-1, 0]")
        prof = get_profile(m)
        out.write(f"profile_m{m:g}.csv", prof.write_csv)
        rows.append((m, prof.xi_m, prof.C_m))

    def write_constants(path):
        with open(path, "w") as fh:
            fh.write("m,xi_m,C_m\n")
            for m, xi, c in rows:
                fh.write(f"{m:.17g},{xi:.17g},{c:.17g}\n")
    out.write("profile_constants.csv", write_constants)
    summary.update(panels=[n for n, _ in forms],
                   profiles=[{"m": m, "xi_m": xi, "C_m": c} for m, xi, c in rows])


RUNNERS = {"obstacle": _run_obstacle, "american_put": _run_put, "family_portrait": _run_portrait}


def _versions() -> dict:
    import numba
    import scipy
    return {"obstacle1d": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path) -> dict:
    """Run one scenario into ``out_dir``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Outputs(out_dir)
    summary: dict = {}
    solver = solver_of(cfg) if cfg.problem != "family_portrait" else SolveConfig()
    e_reg, e_sing = calibration()
    tolerances = {"solver": {"theta": solver.theta, "omega": solver.omega, "tol": solver.tol,
                             "max_iter": solver.max_iter},
                  "energy_regular": e_reg, "energy_singular": e_sing, "ambiguity": AMBIGUITY,
                  "m_agreement": M_AGREEMENT, "theta_jump": THETA_JUMP, "radius_factor": RADIUS_FACTOR}
    start = time.perf_counter()
    RUNNERS[cfg.problem](cfg, out, summary, tolerances)
    manifest = {"scenario": cfg.name, "problem": cfg.problem, "config": cfg.text,
                "versions": _versions(), "tolerances": tolerances,
                "outputs": dict(sorted(out.files.items())), "summary": summary,
                "elapsed_seconds": round(time.perf_counter() - start, 3)}

    def write(path):
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, default=_json_default)
            fh.write("\n")
    _atomic(out_dir / "manifest.json", write)
    return manifest


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")
