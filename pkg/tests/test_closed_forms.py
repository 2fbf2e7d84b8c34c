import math

import numpy as np
import pytest

from obstacle1d.closed_forms import (VFamily, VMinus, VPlus, closed_form, counterexample, get_profile,
                                     residual_on_grid, shoot)
from obstacle1d.grid_field import GridSpec
from oracles import m_of_xi, profile_value


def test_simple_forms():
    x = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(VPlus().value(x, 0.3), [0, 0, 4.5])
    assert np.allclose(VMinus().value(x, -0.3), [2, 0, 0])
    assert np.allclose(counterexample().value(x, -0.5), 0.5)
    assert np.allclose(counterexample().value(x, 0.5), 0.0)
    assert np.allclose(VFamily(0.0).value(x, 0.7), x * x / 2)


@pytest.mark.parametrize("m", [-0.9, -0.5, -0.1])
def test_profile_free_boundary_matches_reduction_of_order(m):
    prof = get_profile(m)
    assert m_of_xi(prof.xi_m) == pytest.approx(m, abs=1e-9)
    for xi in (prof.xi_m + 0.3, prof.xi_m + 2.0):
        assert prof.value(xi) == pytest.approx(profile_value(m, xi), abs=1e-8)


def test_profile_satisfies_ode():
    assert np.max(np.abs(get_profile(-0.5).ode_residual())) < 1e-6


def test_v_m_continuous_across_t_zero():
    v = VFamily(-0.5)
    x = np.linspace(0.1, 2, 7)
    assert np.allclose(v.value(x, -1e-9), v.value(x, 1e-9), atol=1e-7)


def test_positive_set_of_v_m():
    v = VFamily(-0.5)
    C = v.C_m
    assert not v.positive(0.5, 1.01 * C * 0.25)
    assert v.positive(0.5, 0.99 * C * 0.25)


def test_m_zero_profile_is_half_xi_squared():
    prof = get_profile(0.0)
    assert prof.xi_m == 0.0 and math.isinf(prof.C_m)
    assert np.max(np.abs(prof.V - 0.5 * prof.xi ** 2)) <= 1e-8


def test_m_minus_one_is_degenerate():
    prof = get_profile(-1.0)
    assert prof.degenerate and prof.C_m == 0.0


def test_out_of_range_m():
    with pytest.raises(ValueError):
        closed_form("v_m", 0.5)


def test_shoot_returns_quadratic_growth():
    assert shoot(0.0) == pytest.approx(1.0, abs=1e-9)
    assert shoot(2.0) < shoot(1.0) < 1.0


@pytest.mark.parametrize("name, m", [("v_plus", None), ("v_minus", None), ("v_m", 0.0), ("v_m", -1.0)])
def test_residual_small_on_coarse_grid(name, m):
    g = GridSpec(-1, 1, -1, 1, 41, 201)
    assert residual_on_grid(closed_form(name, m), g) < 1e-10
