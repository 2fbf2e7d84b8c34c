import pytest

from obstacle1d.coefficients import CoefficientSet, require_valid, validate
from obstacle1d.errors import HypothesisViolation
from obstacle1d.grid_field import GridSpec

G = GridSpec(-2, 4, -1, 0.2, 61, 13)


def test_variable_set_passes_on_its_box():
    co = CoefficientSet("1 + 0.1*x", "0.1", "-0.2", "1 + 0.1*t", 0.8)
    rep = validate(co, G)
    assert rep.passed
    assert rep.min_a == pytest.approx(0.8)
    assert rep.min_f == pytest.approx(0.9)


def test_zero_f_fails_and_names_the_hypothesis():
    co = CoefficientSet("1", "0", "0", "0", 0.5)
    rep = validate(co, G)
    assert not rep.f_ok and rep.a_ok
    with pytest.raises(HypothesisViolation, match="f >= delta"):
        require_valid(co, G)


def test_delta_must_be_positive():
    with pytest.raises(HypothesisViolation):
        CoefficientSet.constant(delta=0.0)


def test_at_broadcasts():
    co = CoefficientSet("x", "t", "0", "1", 1.0)
    vals = co.at([1.0, 2.0], 3.0)
    assert list(vals["a"]) == [1.0, 2.0]
    assert list(vals["b"]) == [3.0, 3.0]
