import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from obstacle1d.blowup import (DEFAULT_REF_BOX, blowup_ladder, homogeneity_defect, match_profile,
                               max_admissible_eps, refine_local, rescale, restriction_error)
from obstacle1d.closed_forms import VFamily, VMinus, VPlus
from obstacle1d.coefficients import CoefficientSet
from obstacle1d.errors import AdmissibilityError, DegenerateLimitError
from obstacle1d.expr import parse_expression
from obstacle1d.grid_field import Field, GridSpec
from obstacle1d.lcp import solve_parabolic
from oracles import gaussian_weight


def test_rescale_of_homogeneous_form_is_identity():
    v = VFamily(-0.5)
    for eps in (0.5, 0.1):
        ue = rescale(v, (0.0, 0.0), eps)
        X, T = DEFAULT_REF_BOX.mesh()
        assert np.allclose(ue.values, v.value(X, T), atol=1e-12)


def test_rescale_guards_box():
    g = GridSpec(-1, 1, -1, 0, 21, 11)
    f = VPlus().field(g)
    lim = max_admissible_eps(g, (0.0, 0.0))
    assert lim == pytest.approx(0.25)
    with pytest.raises(AdmissibilityError) as info:
        rescale(f, (0.0, 0.0), 0.5)
    assert info.value.limit == pytest.approx(0.25)


def test_defect_zero_for_homogeneous_and_matches_quadrature_otherwise():
    assert homogeneity_defect(VPlus().field(DEFAULT_REF_BOX)) < 1e-20

    def u(x, t):
        return x ** 4
    g = GridSpec(-4, 4, -1, 0, 321, 201)
    d = homogeneity_defect(Field.from_function(g, u))
    # Lu = -2x^4 + 4x^4 = 2x^4
    ref, _ = dblquad(lambda x, t: 4 * x ** 8 * gaussian_weight(x, -t) if t < 0 else 0.0,
                     -1, 0, -4, 4, epsabs=1e-6)
    assert d == pytest.approx(ref, rel=0.01)


def test_match_profile_labels():
    g = DEFAULT_REF_BOX
    assert match_profile(VPlus().field(g)).label == "v_plus"
    assert match_profile(VMinus().field(g)).label == "v_minus"
    m = match_profile(VFamily(-0.3).field(g))
    assert m.label == "v_m" and m.m_hat == pytest.approx(-0.3, abs=1e-3)
    with pytest.raises(DegenerateLimitError):
        match_profile(Field(g, np.zeros((g.nt, g.nx))))


def test_ladder_on_closed_form():
    lad = blowup_ladder(VPlus(), (0.0, 0.0))
    assert lad.epsilons == [0.4, 0.2, 0.1]
    assert all(e.label == "v_plus" for e in lad.entries)
    assert max(lad.defects) < 1e-20
    assert lad.labels_consistent()


def test_refine_local_restricts_to_parent():
    co = CoefficientSet.constant()
    g = GridSpec(-2, 2, -1, 0, 81, 101)
    v = parse_expression("0.5*max(0, x)^2")
    u = solve_parabolic(co, g, v, v, v)
    fine = refine_local(co, u, (0.0, 0.0), 0.2, factor=2)
    assert fine.grid.h == pytest.approx(g.h / 2)
    # boundary data are bicubic samples of the parent, inexact across the kink at x = 0
    assert restriction_error(fine, u) < 1e-5


def test_ladder_csv(tmp_path):
    lad = blowup_ladder(VPlus(), (0.0, 0.0), (0.3, 0.15))
    lines = lad.write_csv(tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "eps,defect,label,m_hat,distance"
    assert len(lines) == 3 and math.isnan(float(lines[1].split(",")[3]))
