from itertools import product
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadcurl.quadrature import (MAX_DEGREE, composite_rule_tet, gauss_edge, integrate,
                                 measure, rule_for, rule_tet, rule_triangle)

REF = {
    1: np.array([[0.0, 0, 0], [1, 0, 0]]),
    2: np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
    3: np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
}


def simplex_monomial(exps):
    """Integral of prod x_i^a_i over the reference simplex: prod a_i! / (sum a + d)!."""
    return np.prod([factorial(a) for a in exps]) / factorial(sum(exps) + len(exps))


def all_rules():
    for dim, top in MAX_DEGREE.items():
        for deg in range(1, top + 1):
            yield dim, deg


@pytest.mark.parametrize("dim,degree", list(all_rules()))
def test_rule_invariants(dim, degree):
    r = rule_for(dim, degree)
    assert r.dimension == dim
    assert abs(r.weights.sum() - 1) < 1e-14
    assert np.all(r.weights > 0)
    assert np.all(r.points >= -1e-15) and np.all(r.points <= 1 + 1e-15)
    assert np.allclose(r.points.sum(axis=1), 1, atol=1e-15)


@pytest.mark.parametrize("dim,degree", list(all_rules()))
def test_monomial_exactness_sweep(dim, degree):
    r = rule_for(dim, degree)
    x = r.points[:, 1:]
    vol = 1 / factorial(dim)
    for exps in product(range(degree + 1), repeat=dim):
        if sum(exps) > degree:
            continue
        approx = vol * (r.weights @ np.prod(x ** np.array(exps), axis=1))
        exact = simplex_monomial(exps)
        assert abs(approx - exact) <= 1e-13 * max(exact, 1e-3), exps


def test_gauss_edge_examples():
    r = gauss_edge(3)
    assert len(r) == 2
    s = r.points[:, 1]
    assert abs(r.weights @ s**3 - 0.25) < 1e-16
    r = gauss_edge(1)
    assert len(r) == 1 and r.points[0, 1] == 0.5 and r.weights[0] == 1.0
    r = gauss_edge(5)
    assert abs(r.weights @ r.points[:, 1] ** 5 - 1 / 6) < 1e-15


def test_triangle_examples():
    r = rule_triangle(1)
    assert len(r) == 1
    assert abs(integrate(REF[2], r, lambda p: 1 - p[:, 0] - p[:, 1]) - 1 / 6) < 1e-16
    r = rule_triangle(2)
    assert len(r) == 3
    lam = r.points
    assert abs(0.5 * r.weights @ (lam[:, 0] * lam[:, 1]) - 0.5 / 12) < 1e-16


def test_tet_examples():
    assert abs(integrate(REF[3], rule_tet(1), lambda p: np.ones(len(p))) - 1 / 6) < 1e-16
    val = integrate(REF[3], rule_tet(6), lambda p: (p[:, 0] * p[:, 1] * p[:, 2]) ** 2)
    assert abs(val - 1 / 45360) < 1e-18


def test_integrate_on_edges_and_faces():
    rng = np.random.default_rng(3)
    e = rng.random((2, 3))
    lam0 = lambda p: np.linalg.norm(p - e[1], axis=1) / np.linalg.norm(e[0] - e[1])
    assert abs(integrate(e, gauss_edge(1), lam0) - measure(e) / 2) < 1e-14

    f = rng.random((3, 3))
    r = rule_triangle(3)
    lam = r.points
    val = measure(f) * (r.weights @ (lam[:, 0] * lam[:, 1] * lam[:, 2]))
    assert abs(val - measure(f) / 60) < 1e-15
    assert abs(integrate(f, r, lambda p: np.ones(len(p))) - measure(f)) < 1e-15


def test_integrate_dimension_mismatch():
    with pytest.raises(ValueError):
        integrate(REF[3], rule_triangle(2), lambda p: np.ones(len(p)))


@pytest.mark.parametrize("fn,bad", [(gauss_edge, 0), (gauss_edge, 10), (rule_triangle, 9),
                                    (rule_tet, 11), (rule_tet, 2.5)])
def test_unsupported_degree(fn, bad):
    with pytest.raises(ValueError):
        fn(bad)


def test_composite_rule():
    r = composite_rule_tet(4, 2)
    assert len(r) == 64 * len(rule_tet(4))
    assert abs(r.weights.sum() - 1) < 1e-14
    # exact for degree 4, and far more accurate than the base rule beyond it
    x = r.points[:, 1:]
    exps = (2, 1, 1)
    assert abs(r.weights @ np.prod(x**exps, axis=1) / 6 - simplex_monomial(exps)) < 1e-17
    f = lambda pts: np.exp(pts[:, 0] + 2 * pts[:, 1] - pts[:, 2])
    fine = integrate(REF[3], rule_tet(10), f)
    err_base = abs(integrate(REF[3], rule_tet(2), f) - fine)
    err_comp = abs(integrate(REF[3], composite_rule_tet(2, 2), f) - fine)
    assert err_comp < err_base / 100
    with pytest.raises(ValueError):
        composite_rule_tet(4, -1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_affine_invariance(seed, degree):
    """Integrating f o A over the reference tet, rescaled, equals f over A(ref)."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    if abs(np.linalg.det(A)) < 1e-2:
        return
    b = rng.normal(size=3)
    mapped = REF[3] @ A.T + b
    c = rng.normal(size=3)
    f = lambda p: np.cos(p @ c)
    rule = rule_tet(degree)
    lhs = integrate(mapped, rule, f)
    rhs = integrate(REF[3], rule, lambda p: f(p @ A.T + b)) * measure(mapped) / measure(REF[3])
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
