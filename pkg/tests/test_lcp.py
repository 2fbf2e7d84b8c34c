import numpy as np
import pytest

from obstacle1d.coefficients import CoefficientSet
from obstacle1d.errors import MMatrixError, NonConvergenceError, ObstacleError
from obstacle1d.expr import parse_expression
from obstacle1d.grid_field import GridSpec
from obstacle1d.lcp import (SolveConfig, TimeStepSystem, assemble_step, operator_bands, psor_solve,
                            solve_parabolic)
from oracles import brute_force_lcp, random_m_matrix_lcp


def test_psor_matches_enumeration_on_small_systems():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        sub, diag, sup, q, A = random_m_matrix_lcp(rng, n)
        U, _ = psor_solve(TimeStepSystem(sub, diag, sup, q), SolveConfig(tol=1e-13))
        assert np.max(np.abs(U - brute_force_lcp(A, q))) <= 1e-10


def test_psor_sweep_cap():
    rng = np.random.default_rng(1)
    sub, diag, sup, q, _ = random_m_matrix_lcp(rng, 8)
    with pytest.raises(NonConvergenceError) as info:
        psor_solve(TimeStepSystem(sub, diag, sup, q + 5), SolveConfig(max_iter=1, omega=1.0))
    assert info.value.residual > 0


def test_bands_switch_to_upwind_at_high_peclet():
    lower, centre, upper = operator_bands(1.0, 100.0, 0.0, 0.1)
    assert lower > 0 and upper > 0
    assert lower + centre + upper == pytest.approx(0.0)


def test_m_matrix_violation_reports_required_step():
    co = CoefficientSet("1", "0", "2", "1", 1.0)
    g = GridSpec(0, 1, 0, 1, 11, 2)
    with pytest.raises(MMatrixError) as info:
        assemble_step(co, g, np.zeros(11), 0)
    assert info.value.required_tau == pytest.approx(0.5)


def test_stationary_v_plus_is_reproduced():
    co = CoefficientSet.constant()
    g = GridSpec(-1, 1, -1, 0, 101, 51)
    v = parse_expression("0.5*max(0, x)^2")
    u = solve_parabolic(co, g, v, v, v)
    X, _ = g.mesh()
    assert np.max(np.abs(u.values - 0.5 * np.maximum(X, 0) ** 2)) < 1e-6
    assert u.meta["complementarity_residual"] <= SolveConfig().tol


def test_negative_data_rejected():
    co = CoefficientSet.constant()
    g = GridSpec(-1, 1, -1, 0, 11, 3)
    with pytest.raises(ObstacleError, match="negative"):
        solve_parabolic(co, g, parse_expression("x"), parse_expression("0"), parse_expression("1"))


def test_solution_is_nonnegative_and_complementary():
    co = CoefficientSet("1 + 0.1*x", "0.1", "-0.2", "1 + 0.1*t", 0.8)
    g = GridSpec(-2, 4, -1, 0, 61, 51)
    data = parse_expression("0.5*max(0, x - 1)^2")
    u = solve_parabolic(co, g, data, parse_expression("0"), data)
    assert u.values.min() >= 0
    assert u.meta["complementarity_residual"] <= 1e-8
