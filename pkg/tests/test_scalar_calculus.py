import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from univlab.scalar_calculus import (
    ScalarFunction,
    divided_difference,
    genocchi_hermite,
    simplex_quadrature,
    taylor_taylor_remainder,
)

CUBE = ScalarFunction.power(3)
SQUARE = ScalarFunction.power(2)


def test_first_difference_cube_matches_ratio_oracle():
    oracle = (CUBE.value(1.0) - CUBE.value(2.0)) / (1.0 - 2.0)
    assert divided_difference(CUBE, [1.0, 2.0]) == pytest.approx(oracle)
    assert oracle == pytest.approx(7.0)


def test_confluent_first_difference_is_derivative():
    assert divided_difference(SQUARE, [3.0, 3.0]) == pytest.approx(6.0)


def test_power_closed_form_sum():
    # sum of a^q b^r over q+r = p-1, at p=3, (a,b)=(2,1): 4 + 2 + 1
    assert divided_difference(CUBE, [2.0, 1.0]) == pytest.approx(7.0)


def test_resolvent_difference_is_product_of_resolvents():
    f = ScalarFunction.resolvent(2j)
    got = divided_difference(f, [0.5, -1.5])
    assert got == pytest.approx(1.0 / ((2j - 0.5) * (2j + 1.5)))


@settings(max_examples=200, deadline=None)
@given(
    pts=st.lists(st.floats(-3, 3), min_size=2, max_size=4),
    p=st.integers(0, 6),
)
def test_permutation_symmetry(pts, p):
    f = ScalarFunction.power(p)
    base = divided_difference(f, pts)
    rng = np.random.default_rng(0)
    perm = list(pts)
    rng.shuffle(perm)
    assert divided_difference(f, perm) == pytest.approx(base, rel=1e-10, abs=1e-10)


def test_permutation_symmetry_smooth():
    f = ScalarFunction.smooth(np.sin, [np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a)])
    pts = [0.3, -1.2, 2.0, 0.9]
    base = divided_difference(f, pts)
    for perm in ([2.0, 0.3, 0.9, -1.2], [0.9, 2.0, -1.2, 0.3]):
        assert divided_difference(f, perm) == pytest.approx(base, rel=1e-9)


def test_chain_rule():
    rng = np.random.default_rng(7)
    f = ScalarFunction.power(3)
    g = ScalarFunction.smooth(np.sin, [np.cos])
    for _ in range(25):
        a, b = rng.uniform(-2, 2, size=2)
        comp = ScalarFunction.smooth(lambda x: np.sin(x) ** 3)
        lhs = divided_difference(comp, [a, b]) if abs(a - b) > 1e-6 else None
        if lhs is None:
            continue
        rhs = divided_difference(f, [g.value(a), g.value(b)]) * divided_difference(g, [a, b])
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_leibniz_rule():
    rng = np.random.default_rng(8)
    f = ScalarFunction.smooth(np.sin, [np.cos])
    g = ScalarFunction.power(4)
    prod = ScalarFunction.smooth(lambda x: np.sin(x) * x**4)
    for _ in range(25):
        a, b = rng.uniform(-2, 2, size=2)
        if abs(a - b) < 1e-6:
            continue
        lhs = divided_difference(prod, [a, b])
        rhs = f.value(a) * divided_difference(g, [a, b]) + divided_difference(f, [a, b]) * g.value(b)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_difference_bounded_by_derivative_sup():
    # |D^k f| <= 1 everywhere for f = sin, so |Delta^k f| <= 1/k!
    f = ScalarFunction.smooth(
        np.sin, [np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a)])
    rng = np.random.default_rng(11)
    for k in (1, 2, 3):
        for _ in range(50):
            pts = rng.uniform(-5, 5, size=k + 1)
            assert abs(divided_difference(f, pts)) <= 1.0 / math.factorial(k) + 1e-12


def test_order_above_three_rejected():
    with pytest.raises(ValueError, match="order"):
        divided_difference(SQUARE, [0.0, 1.0, 2.0, 3.0, 4.0])


def test_smooth_missing_derivative_rejected():
    f = ScalarFunction.smooth(np.sin, [np.cos])
    with pytest.raises(ValueError, match="derivatives"):
        divided_difference(f, [1.0, 1.0, 1.0])


def test_quadrature_weights_sum_to_simplex_volume():
    for k in (0, 1, 2, 3):
        quad = simplex_quadrature(k)
        assert quad.weights.sum() == pytest.approx(1.0 / math.factorial(k), abs=1e-12)
        assert np.all(quad.nodes >= -1e-14)
        np.testing.assert_allclose(quad.nodes.sum(axis=1), 1.0, atol=1e-12)


def test_genocchi_hermite_examples():
    quad1 = simplex_quadrature(1)
    assert genocchi_hermite(SQUARE, [0.0, 2.0], quad1) == pytest.approx(2.0)
    assert genocchi_hermite(ScalarFunction.power(1), [-3.3, 17.0], quad1) == pytest.approx(1.0)
    quad2 = simplex_quadrature(2)
    assert genocchi_hermite(CUBE, [1.0, 1.0, 1.0], quad2) == pytest.approx(3.0)


def test_genocchi_hermite_matches_divided_difference_for_polynomials():
    rng = np.random.default_rng(3)
    for k in (1, 2, 3):
        quad = simplex_quadrature(k)
        for p in range(k, 9):
            f = ScalarFunction.power(p)
            pts = rng.uniform(-2, 2, size=k + 1)
            a = genocchi_hermite(f, pts, quad)
            b = divided_difference(f, pts)
            assert a == pytest.approx(b, rel=1e-8, abs=1e-10)


def test_genocchi_hermite_order_mismatch():
    with pytest.raises(ValueError, match="order"):
        genocchi_hermite(SQUARE, [0.0, 1.0, 2.0], simplex_quadrature(1))


def test_taylor_taylor_square():
    expansion, remainder = taylor_taylor_remainder(SQUARE, 2.0, 1.0, 1)
    assert expansion == pytest.approx(2.0)
    assert remainder == pytest.approx(1.0)
    assert expansion + remainder == pytest.approx(SQUARE.value(2.0) - SQUARE.value(1.0))


def test_taylor_taylor_zero_increment():
    for p in (2, 5):
        _, remainder = taylor_taylor_remainder(ScalarFunction.power(p), 1.3, 1.3, 1)
        assert remainder == pytest.approx(0.0, abs=1e-14)


def test_taylor_taylor_cubic_remainder_is_one():
    expansion, remainder = taylor_taylor_remainder(CUBE, 1.0, 0.0, 2)
    assert expansion == pytest.approx(0.0, abs=1e-14)
    assert remainder == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), k=st.integers(0, 2))
def test_taylor_taylor_reconstructs_increment(a, b, k):
    f = ScalarFunction.smooth(
        np.sin, [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)])
    expansion, remainder = taylor_taylor_remainder(f, a, b, k)
    target = f.value(a) - f.value(b)
    assert expansion + remainder == pytest.approx(target, rel=1e-10, abs=1e-10)


def test_mixed_cluster_confluence():
    # (a, a, b) reduces to exact derivative substitution inside the cluster
    f = ScalarFunction.smooth(
        np.sin, [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)])
    got = divided_difference(f, [1.0, 1.0, 2.0])
    exact = divided_difference(ScalarFunction.power(3), [1.0, 1.0, 2.0])
    # oracle for the power comparison: h_1(1,1,2) = 1+1+2
    assert exact == pytest.approx(4.0)
    # smooth path: compare against (Df(a) - Delta f(a,b)) / (a - b)
    oracle = (np.cos(1.0) - (np.sin(1.0) - np.sin(2.0)) / (1.0 - 2.0)) / (1.0 - 2.0)
    assert got == pytest.approx(oracle, rel=1e-12)


def test_abs_power_difference():
    f = ScalarFunction.abs_power(4.0)
    # away from zero |a|^4 == a^4
    assert divided_difference(f, [1.0, 2.0]) == pytest.approx(
        divided_difference(ScalarFunction.power(4), [1.0, 2.0]))
    assert divided_difference(f, [1.5, 1.5]) == pytest.approx(4 * 1.5**3)
