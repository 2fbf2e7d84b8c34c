"""Property-based checks of invariants."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from obstacle1d.closed_forms import VFamily, VMinus, VPlus
from obstacle1d.energetics import energy
from obstacle1d.expr import BinOp, Call, Neg, Num, Var, evaluate, parse_expression, pretty_print
from obstacle1d.grid_field import Field, GridSpec, sample
from obstacle1d.lcp import SolveConfig, TimeStepSystem, psor_solve
from oracles import brute_force_lcp

# expression trees

numbers = st.floats(min_value=0, max_value=1e3, allow_nan=False).map(Num)
leaves = st.one_of(numbers, st.sampled_from(["x", "t"]).map(Var))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(st.sampled_from(["exp", "sin", "cos", "abs", "sqrt", "log"]), children)
        .map(lambda a: Call(a[0], (a[1],))),
        st.tuples(st.sampled_from(["max", "min"]), children, children)
        .map(lambda a: Call(a[0], (a[1], a[2]))),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees, st.floats(-3, 3), st.floats(-3, 3))
def test_pretty_print_round_trip(tree, x, t):
    text = pretty_print(tree)
    back = parse_expression(text)
    assert pretty_print(back) == text
    with np.errstate(all="ignore"):
        a, b = evaluate(tree, x, t), evaluate(back, x, t)
    assert (math.isnan(a) and math.isnan(b)) or a == b


# parabolic homogeneity of the closed forms

forms = st.one_of(st.just(VPlus()), st.just(VMinus()),
                  st.sampled_from([-1.0, -0.75, -0.5, -0.25, 0.0]).map(VFamily))


@settings(max_examples=200, deadline=None)
@given(forms, st.floats(0.1, 5), st.floats(-2, 2), st.floats(-1, 1))
def test_closed_forms_are_two_homogeneous(v, lam, x, t):
    lhs = float(v.value(lam * x, lam * lam * t))
    rhs = lam * lam * float(v.value(x, t))
    assert math.isclose(lhs, rhs, rel_tol=1e-7, abs_tol=1e-9 * max(1.0, lam * lam))


@settings(max_examples=100, deadline=None)
@given(forms, st.floats(-2, 2), st.floats(-1, -0.01))
def test_closed_forms_nonnegative(v, x, t):
    assert float(v.value(x, t)) >= 0


# PSOR against enumeration

@st.composite
def m_matrix_lcps(draw):
    n = draw(st.integers(1, 8))
    off = st.floats(0, 1)
    sub = np.array([0.0] + [-draw(off) for _ in range(n - 1)])
    sup = np.array([-draw(off) for _ in range(n - 1)] + [0.0])
    diag = np.abs(sub) + np.abs(sup) + np.array([draw(st.floats(0.05, 2)) for _ in range(n)])
    q = np.array([draw(st.floats(-5, 5)) for _ in range(n)])
    return sub, diag, sup, q


@settings(max_examples=300, deadline=None)
@given(m_matrix_lcps())
def test_psor_agrees_with_enumeration(lcp):
    sub, diag, sup, q = lcp
    A = np.diag(diag)
    if len(q) > 1:
        A += np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    U, _ = psor_solve(TimeStepSystem(sub, diag, sup, q), SolveConfig(tol=1e-13, max_iter=100000))
    Z = brute_force_lcp(A, q)
    assert np.max(np.abs(U - Z)) <= 1e-8
    w = A @ U - q
    assert U.min() >= 0 and w.min() >= -1e-10


# interpolation and energy scaling

@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_sample_reproduces_cubics(c, x, t):
    def p(X, T):
        return c[0] + c[1] * X + c[2] * T + c[3] * X ** 3 + c[4] * X * T ** 2 + c[5] * T ** 3
    g = GridSpec(-1, 1, -1, 1, 21, 21)
    assert math.isclose(sample(Field.from_function(g, p), x, t), p(x, t), abs_tol=1e-10)


class _Quartic:
    """``u = A + B x^2 + C t + D (x^4 + 12 x^2 t + 12 t^2)`` with exact derivatives."""

    def __init__(self, A, B, C, D, eps=1.0):
        self.c = (A, B, C, D)
        self.eps = eps

    def value(self, x, t):
        A, B, C, D = self.c
        e = self.eps
        X, T = e * np.asarray(x), e * e * np.asarray(t)
        return (A + B * X ** 2 + C * T + D * (X ** 4 + 12 * X ** 2 * T + 12 * T ** 2)) / (e * e)

    def dx(self, x, t):
        A, B, C, D = self.c
        e = self.eps
        X, T = e * np.asarray(x), e * e * np.asarray(t)
        return (2 * B * X + D * (4 * X ** 3 + 24 * X * T)) / e

    def dt(self, x, t):
        A, B, C, D = self.c
        e = self.eps
        X, T = e * np.asarray(x), e * e * np.asarray(t)
        return C + D * (12 * X ** 2 + 24 * T)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 0.1),
       st.floats(0.2, 1), st.floats(-1, -0.2))
def test_energy_scale_invariance(A, B, C, D, eps, t):
    u = _Quartic(A, B, C, D)
    ue = _Quartic(A, B, C, D, eps)
    lhs = energy(u, (0.0, 0.0), eps * eps * t).value
    rhs = energy(ue, (0.0, 0.0), t).value
    assert math.isclose(lhs, rhs, rel_tol=1e-8, abs_tol=1e-8)
