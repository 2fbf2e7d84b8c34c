
import numpy as np
import pytest

from obstacle1d.classifier import (REGULAR, SINGULAR, UNRESOLVED, classify_boundary, classify_point,
                                   default_eps_ladder, normalize_at, smoothfit_report, trace_times,
                                   write_diagnoses)
from obstacle1d.closed_forms import VFamily, VPlus, counterexample
from obstacle1d.coefficients import CoefficientSet
from obstacle1d.errors import AdmissibilityError, HypothesisViolation
from obstacle1d.free_boundary import extract
from obstacle1d.grid_field import GridSpec

G = GridSpec(-1, 1, -1, 1, 201, 801)


def test_normalize_at_shifts_and_scales():
    co = CoefficientSet("4", "0", "0", "2", 1.0)
    u = VPlus().field(G)
    un = normalize_at(u, co, (0.2, 0.5))
    assert un.grid.x_min == pytest.approx((-1 - 0.2) / 2)
    assert un.grid.t_max == pytest.approx(0.5)
    assert np.allclose(un.values, u.values / 2)
    with pytest.raises(AdmissibilityError):
        normalize_at(u, co, (0.999, 0.0))
    with pytest.raises(HypothesisViolation):
        normalize_at(u, CoefficientSet("x + 1", "0", "0", "1", 0.5), (-0.9, 0.0))


def test_eps_ladder_and_trace_times():
    un = normalize_at(VPlus().field(G), None, (0.0, 0.0))
    eps = default_eps_ladder(un)
    assert eps[0] == pytest.approx(1 / 3)
    assert all(b < a for a, b in zip(eps, eps[1:]))
    ts = trace_times(un, eps)
    assert all(t < 0 for t in ts)
    assert np.allclose(np.round((np.array(ts) - un.grid.t_min) / un.grid.tau),
                       (np.array(ts) - un.grid.t_min) / un.grid.tau)


def test_regular_point():
    d = classify_point(VPlus().field(G), None, (0.0, 0.0))
    assert d.label == REGULAR
    assert d.E0 == pytest.approx(0.5, abs=0.01)
    assert d.liminf.passed
    assert max(d.jumps) < 1e-9


def test_singular_points_with_m():
    d = classify_point(counterexample().field(G), None, (0.3, 0.0))
    assert d.label == SINGULAR and d.m_hat == pytest.approx(-1.0, abs=0.05)
    d = classify_point(VFamily(-0.5).field(G), None, (0.0, 0.0))
    assert d.label == SINGULAR and d.m_hat == pytest.approx(-0.5, abs=0.05)
    assert d.phi_monotone


def test_short_history_is_unresolved():
    g = GridSpec(-1, 1, -0.004, 0.1, 201, 53)
    d = classify_point(VPlus().field(g), None, (0.0, 0.0))
    assert d.label == UNRESOLVED and "insufficient_trace" in d.flags


def test_classify_boundary_and_csv(tmp_path):
    u = counterexample().field(G)
    gamma = extract(u)
    pts = [p for p in gamma if abs(p.x) < 0.3][::20]
    diags = classify_boundary(u, None, gamma, pts)
    assert diags and all(d.label == SINGULAR for d in diags)
    lines = write_diagnoses(diags, tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].startswith("t,x,E0,label,m_hat,jump_r1")
    assert len(lines) == len(diags) + 1


def test_smoothfit_report_counterexample_and_regular(tmp_path):
    u = counterexample().field(G)
    rep = smoothfit_report(u, None, extract(u))
    assert rep.bad_slices == [int(round((0.0 - G.t_min) / G.tau))]
    assert rep.global_max_jump == pytest.approx(1.0, abs=1e-6)
    assert not rep.ut_nonnegative
    rep2 = smoothfit_report(VPlus().field(G), None, extract(VPlus().field(G)))
    assert rep2.bad_slices == [] and rep2.ut_nonnegative
    assert rep.write_csv(tmp_path / "s.csv").read_text().startswith("t,x,orientation,jump_r1")
