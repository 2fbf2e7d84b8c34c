import numpy as np
import pytest

from obstacle1d.closed_forms import VFamily, VPlus, counterexample
from obstacle1d.errors import AdmissibilityError
from obstacle1d.free_boundary import (SPATIAL, TEMPORAL, extract, liminf_ut_check, min_radius,
                                      ut_jump)
from obstacle1d.grid_field import GridSpec

G = GridSpec(-1, 1, -1, 1, 201, 801)


def test_v_plus_boundary_is_x_zero():
    gamma = extract(VPlus().field(G))
    pts = gamma.of(SPATIAL)
    assert len(pts) == G.nt
    assert max(abs(p.x) for p in pts) < 1e-6
    assert all(p.side == 1 for p in pts)
    assert not gamma.of(TEMPORAL)


def test_counterexample_boundary_is_t_zero():
    gamma = extract(counterexample().field(G))
    assert len(gamma.of(TEMPORAL)) == G.nx
    assert max(abs(p.t) for p in gamma) < 1e-12


def test_v_m_boundary_follows_parabola():
    v = VFamily(-0.5)
    gamma = extract(v.field(G))
    pos = [p for p in gamma.of(SPATIAL) if p.t > 0.1]
    assert pos
    dev = max(abs(abs(p.x) - np.sqrt(p.t / v.C_m)) for p in pos)
    assert dev < 2 * G.h


def test_no_transition_gives_empty_set():
    f = VFamily(0.0).field(GridSpec(0.5, 1, -1, 1, 11, 11))
    assert len(extract(f)) == 0


def test_ut_jump_values():
    u = counterexample().field(G)
    assert ut_jump(u, (0.0, 0.0), 0.2).jump == pytest.approx(1.0, abs=1e-6)
    assert ut_jump(VPlus().field(G), (0.0, 0.0), 0.2).jump == pytest.approx(0.0, abs=1e-9)


def test_ut_jump_guards():
    u = VPlus().field(G)
    with pytest.raises(ValueError):
        ut_jump(u, (0.0, 0.0), 0.5 * min_radius(u))
    with pytest.raises(AdmissibilityError):
        ut_jump(u, (0.95, 0.0), 0.2)


def test_liminf_passes_on_solutions():
    for v, P in ((VPlus(), (0.0, 0.0)), (counterexample(), (0.3, 0.0)), (VFamily(-0.5), (0.0, 0.0))):
        chk = liminf_ut_check(v.field(G), P)
        assert chk.passed, (v, chk)


def test_liminf_fails_where_ut_is_positive_everywhere():
    g = GridSpec(-1, 1, 0, 1, 41, 41)
    f = VPlus().field(g)
    from obstacle1d.grid_field import Field
    shifted = Field(g, f.values + np.linspace(0, 1, g.nt)[:, None])
    chk = liminf_ut_check(shifted, (0.0, 0.5))
    assert not chk.passed and chk.final == pytest.approx(1.0)


def test_boundary_csv(tmp_path):
    gamma = extract(VPlus().field(GridSpec(-1, 1, -1, 0, 21, 3)))
    lines = gamma.write_csv(tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "t,x,orientation,side,quad_coeff"
    assert len(lines) == 4
