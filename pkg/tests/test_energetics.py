import math

import numpy as np
import pytest
from scipy.integrate import simpson

from obstacle1d.closed_forms import VFamily, VMinus, VPlus
from obstacle1d.energetics import (L_norm, calibration, energy, energy_derivative_residual,
                                   energy_trace, extrapolate_limit, heat_kernel, phi)
from obstacle1d.errors import AdmissibilityError
from obstacle1d.grid_field import Field, GridSpec
from oracles import energy_quad, v_m_negative_time


def test_heat_kernel_has_unit_mass():
    y = np.linspace(-30, 30, 20001)
    assert simpson(heat_kernel(y, -2.0), x=y) == pytest.approx(1.0, abs=1e-10)


def test_calibration_matches_quadrature_oracle():
    e_reg, e_sing = calibration()
    assert e_reg == pytest.approx(energy_quad(lambda y: 0.5 * max(y, 0) ** 2, lambda y: max(y, 0)), abs=1e-9)
    assert e_sing == pytest.approx(energy_quad(*v_m_negative_time(0.0)), abs=1e-9)


@pytest.mark.parametrize("m", [-1.0, -0.7, -0.5, -0.2, 0.0])
def test_v_m_energy_matches_oracle(m):
    assert energy(VFamily(m)).value == pytest.approx(energy_quad(*v_m_negative_time(m)), abs=1e-8)


def test_homogeneous_forms_have_zero_L():
    for v in (VPlus(), VMinus(), VFamily(-0.5)):
        assert L_norm(v, t=-0.7).value < 1e-20


def test_phi_vanishes_on_own_family_member():
    assert phi(VFamily(-0.5), m=-0.5, t=-0.4).value < 1e-20
    assert phi(VFamily(-0.5), m=0.0, t=-0.4).value > 1e-3


def test_energy_of_non_homogeneous_function_decreases():
    def u(x, t):
        return -0.5 * t + 0.25 * x ** 2 + 0.01 * (x ** 4 + 12 * x ** 2 * t + 12 * t ** 2)
    g = GridSpec(-8, 8, -1, 0, 801, 401)
    f = Field.from_function(g, u)
    tr = energy_trace(f, (0.0, 0.0), [-0.9, -0.6, -0.4, -0.2, -0.1])
    assert np.all(np.diff(tr.energies) <= 1e-6)
    chk = energy_derivative_residual(f, t=-0.5)
    assert chk.relative < 0.05


def test_slab_outside_box_is_inadmissible():
    g = GridSpec(-2, 2, -0.5, 0, 41, 11)
    f = Field(g, np.zeros((11, 41)))
    with pytest.raises(AdmissibilityError):
        energy(f, (0.0, 0.0), -1.0)


def test_extrapolation():
    vals = [1 + 0.5 ** k for k in range(6)]
    assert extrapolate_limit(vals) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        extrapolate_limit([1.0, 2.0])


def test_trace_csv(tmp_path):
    tr = energy_trace(VPlus(), (0.0, 0.0), [-1, -0.5, -0.25], phi_m=(0.0,))
    text = tr.write_csv(tmp_path / "e.csv").read_text().splitlines()
    assert text[0] == "t,E,Lnorm,phi_0"
    assert len(text) == 4
    assert math.isclose(tr.E0, 0.5, abs_tol=1e-9)
