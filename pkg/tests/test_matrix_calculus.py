import numpy as np
import pytest

from univlab.matrix_calculus import (
    MatrixFunction,
    MultiIndexSet,
    PoleProximityError,
    closed_form_difference,
    evaluate,
    matrix_difference,
    matrix_second_difference,
    nonneg_sum_tuples,
    positive_sum_tuples,
    resolvent,
    resolvent_q_tuples,
    trace_derivative_pairing,
)
from univlab.util import sym

RNG = np.random.default_rng(42)


def random_hermitian(d, scale=1.0, rng=RNG):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return sym(scale * a)


def as_mat(x):
    return np.array([[x]], dtype=complex)


ALL_KINDS = [
    MatrixFunction.power(4),
    MatrixFunction.inverse_power(2),
    MatrixFunction.resolvent(2j),
    MatrixFunction.resolvent_square(1 + 2j),
    MatrixFunction.power_derivative(2),
    MatrixFunction.resolvent_power_derivative(2j, 1),
]


def test_square_difference_at_identity():
    eye = np.eye(2, dtype=complex)
    got = matrix_difference(MatrixFunction.power(2), eye, eye, eye)
    np.testing.assert_allclose(got, 2 * eye, atol=1e-14)


def test_resolvent_difference_scalar_value():
    f = MatrixFunction.resolvent(2j)
    got = matrix_difference(f, as_mat(1.0), as_mat(-1.0), as_mat(1.0))
    oracle = (1 / (2j - 1) - 1 / (2j + 1)) / (1 - (-1))
    assert got[0, 0] == pytest.approx(oracle)
    assert got[0, 0] == pytest.approx(-0.2)


def test_power_difference_closed_form_matches_block():
    for p in (1, 2, 3, 5):
        f = MatrixFunction.power(p)
        a, b, h = (random_hermitian(3) for _ in range(3))
        block = matrix_difference(f, a, b, h)
        explicit = sum(
            np.linalg.matrix_power(a, q) @ h @ np.linalg.matrix_power(b, p - 1 - q)
            for q in range(p))
        np.testing.assert_allclose(block, explicit, rtol=1e-10, atol=1e-10)


def test_second_difference_cube_at_zero():
    z = np.zeros((2, 2), dtype=complex)
    h1, h2 = random_hermitian(2), random_hermitian(2)
    got = matrix_second_difference(MatrixFunction.power(3), z, z, z, h1, h2)
    np.testing.assert_allclose(got, np.zeros((2, 2)), atol=1e-14)


def test_second_difference_inverse_scalar():
    f = MatrixFunction.inverse_power(1)
    got = matrix_second_difference(
        f, as_mat(1.0), as_mat(2.0), as_mat(4.0), as_mat(1.0), as_mat(1.0))
    assert got[0, 0] == pytest.approx(1 / 8)


def test_confluent_second_difference_is_half_second_derivative():
    f = MatrixFunction.power(4)
    a = random_hermitian(3)
    h = random_hermitian(3)
    got = matrix_second_difference(f, a, a, a, h, h)
    step = 1e-4
    fd = (evaluate(f, a + step * h) - 2 * evaluate(f, a) + evaluate(f, a - step * h)) / step**2
    np.testing.assert_allclose(got, fd / 2, rtol=1e-5, atol=1e-5)


def test_difference_identity_all_kinds():
    for f in ALL_KINDS:
        for d in (1, 2, 4, 8):
            a = random_hermitian(d)
            b = random_hermitian(d)
            if f.kind == "inverse_power":
                a = a + 4 * np.eye(d)
                b = b + 4 * np.eye(d)
            lhs = evaluate(f, a) - evaluate(f, b)
            rhs = matrix_difference(f, a, b, a - b)
            scale = max(np.linalg.norm(lhs), 1e-3)
            np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9 * scale)


def test_second_difference_reductions():
    for f in (MatrixFunction.power(5), MatrixFunction.resolvent_square(2j)):
        a, b, c, h = (random_hermitian(3) for _ in range(4))
        left = matrix_difference(f, a, b, h) - matrix_difference(f, a, c, h)
        right = matrix_second_difference(f, a, b, c, h, b - c)
        np.testing.assert_allclose(left, right, rtol=0, atol=1e-9 * max(1, np.linalg.norm(left)))

        left2 = matrix_difference(f, a, b, h) - matrix_difference(f, b, b, h)
        right2 = matrix_second_difference(f, a, b, b, a - b, h)
        np.testing.assert_allclose(left2, right2, rtol=0, atol=1e-9 * max(1, np.linalg.norm(left2)))


def test_direction_linearity():
    f = MatrixFunction.resolvent(1j)
    a, b, h1, h2 = (random_hermitian(2) for _ in range(4))
    alpha, beta = 0.37, -1.21
    lin = matrix_difference(f, a, b, alpha * h1 + beta * h2)
    split = alpha * matrix_difference(f, a, b, h1) + beta * matrix_difference(f, a, b, h2)
    np.testing.assert_allclose(lin, split, atol=1e-12)


def test_direction_bilinearity():
    f = MatrixFunction.power(3)
    a, b, c, g1, g2, h = (random_hermitian(2) for _ in range(6))
    alpha, beta = 2.0, 0.5
    lhs = matrix_second_difference(f, a, b, c, alpha * g1 + beta * g2, h)
    rhs = (alpha * matrix_second_difference(f, a, b, c, g1, h)
           + beta * matrix_second_difference(f, a, b, c, g2, h))
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1, np.linalg.norm(lhs)))


def test_closed_form_power_two_second_difference_is_gh():
    a, b, c, g, h = (random_hermitian(2) for _ in range(5))
    got = closed_form_difference(MatrixFunction.power(2), [a, b, c], [g, h])
    np.testing.assert_allclose(got, g @ h, atol=1e-13)


def test_resolvent_square_index_triples():
    assert sorted(positive_sum_tuples(4, 3)) == [(1, 1, 2), (1, 2, 1), (2, 1, 1)]


def test_resolvent_q_cardinality_and_sums():
    for p in (1, 2, 3):
        q = resolvent_q_tuples(p)
        assert len(q) == 2 * (p + 1) * (2 * p + 1)
        assert all(sum(t) == 2 * p + 3 for t in q)
        assert len(set(q)) == len(q)
    idx = MultiIndexSet.resolvent_q(1)
    assert len(idx.tuples) == 12


def test_nonneg_sum_cardinality():
    import math
    for total, arity in [(3, 3), (5, 2), (0, 3), (7, 6)]:
        tuples = nonneg_sum_tuples(total, arity)
        assert len(tuples) == math.comb(total + arity - 1, arity - 1)
        assert all(sum(t) == total for t in tuples)


@pytest.mark.parametrize("f", ALL_KINDS, ids=lambda f: f.kind)
def test_closed_form_matches_block_path(f):
    rng = np.random.default_rng(hash(f.kind) % 2**32)
    for _ in range(20):
        d = int(rng.integers(1, 5))
        mats = [sym(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
                for _ in range(5)]
        a, b, c, g, h = mats
        if f.kind == "inverse_power":
            shift = 5 * np.eye(d)
            a, b, c = a + shift, b + shift, c + shift
        block2 = matrix_second_difference(f, a, b, c, g, h)
        closed2 = closed_form_difference(f, [a, b, c], [g, h])
        scale = max(np.linalg.norm(block2), 1.0)
        np.testing.assert_allclose(block2, closed2, rtol=0, atol=1e-10 * scale)

        block1 = matrix_difference(f, a, b, g)
        closed1 = closed_form_difference(f, [a, b], [g])
        scale = max(np.linalg.norm(block1), 1.0)
        np.testing.assert_allclose(block1, closed1, rtol=0, atol=1e-10 * scale)


def test_trace_pairing_examples():
    a = random_hermitian(3)
    eye = np.eye(3, dtype=complex)
    got = trace_derivative_pairing(MatrixFunction.power(2), a, eye, eye)
    assert got == pytest.approx(2 * np.trace(a) / 3)

    h1, h2 = random_hermitian(3), random_hermitian(3)
    got = trace_derivative_pairing(MatrixFunction.power(1), a, h1, h2)
    assert got == pytest.approx(np.trace(h1 @ h2) / 3)

    av = 0.7
    got = trace_derivative_pairing(
        MatrixFunction.resolvent_square(2j), as_mat(av), as_mat(1.3), as_mat(-0.4))
    assert got == pytest.approx(1.3 * (-0.4) * 2 / (2j - av) ** 3)


def test_trace_pairing_matches_finite_difference():
    g = MatrixFunction.power(2)
    a, h1, h2 = (random_hermitian(3) for _ in range(3))
    step = 1e-6
    fd = (np.trace(h1 @ evaluate(g, a + step * h2)) - np.trace(h1 @ evaluate(g, a - step * h2))) / (2 * step * 3)
    assert trace_derivative_pairing(g, a, h1, h2) == pytest.approx(fd, rel=1e-6)


def test_pole_proximity_rejected():
    f = MatrixFunction.inverse_power(1)
    near_singular = np.diag([1.0, 1e-10]).astype(complex)
    with pytest.raises(PoleProximityError):
        matrix_difference(f, near_singular, np.eye(2, dtype=complex), np.eye(2, dtype=complex))


def test_dimension_mismatch_rejected():
    f = MatrixFunction.power(2)
    with pytest.raises(ValueError, match="dimension"):
        matrix_difference(f, np.eye(2), np.eye(3), np.eye(2))


def test_resolvent_norm_bound():
    for d in (1, 3, 6):
        a = random_hermitian(d, scale=3.0)
        for power in (1, 2, 4):
            r = resolvent(a, 2j, power=power)
            assert np.linalg.norm(r, 2) <= 0.5**power * (1 + 1e-8)


def test_resolvent_rejects_real_zeta():
    with pytest.raises(ValueError):
        resolvent(np.eye(2, dtype=complex), 1.5)
