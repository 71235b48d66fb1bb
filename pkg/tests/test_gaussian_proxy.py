import numpy as np
import pytest

from univlab.ensembles import (
    EnsembleSpec,
    Summand,
    gaussian_coefficient_ensemble,
    rademacher_scalar,
)
from univlab.gaussian_proxy import (
    GaussianProxy,
    VarianceTensor,
    build_proxy,
    gauss_hermite_nodes,
    proxy_for,
    proxy_nodes,
    sample_interpolant,
    unvec,
    variance_tensor,
    vec,
)
from univlab.matrix_calculus import MatrixFunction, matrix_difference
from univlab.util import is_self_adjoint, ntrace, sym

RNG = np.random.default_rng(0)


def random_hermitian(d, rng=RNG):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return sym(a)


def test_vec_unvec_round_trip_and_isometry():
    for d in (1, 2, 4):
        a = random_hermitian(d)
        v = vec(a)
        assert v.dtype == float and v.shape == (d * d,)
        np.testing.assert_allclose(unvec(v, d), a, atol=1e-14)
        assert np.dot(v, v) == pytest.approx(np.linalg.norm(a, "fro") ** 2)


def test_single_gaussian_coefficient_kron_form():
    a = random_hermitian(3)
    spec = gaussian_coefficient_ensemble([a])
    vt = variance_tensor(spec)
    np.testing.assert_allclose(vt.kron_form(), np.kron(a, a), atol=1e-10)


def test_scalar_rademacher_variance():
    vt = variance_tensor(rademacher_scalar(2))
    np.testing.assert_allclose(vt.real_covariance, [[2.0]], atol=1e-14)


def test_rademacher_coefficients_kron_sum():
    mats = [random_hermitian(2), random_hermitian(2)]
    spec = EnsembleSpec(d=2, summands=[Summand.rademacher(m) for m in mats])
    vt = variance_tensor(spec)
    expected = np.kron(mats[0], mats[0]) + np.kron(mats[1], mats[1])
    np.testing.assert_allclose(vt.kron_form(), expected, atol=1e-10)


def test_finite_support_variance_matches_enumeration():
    atoms = [random_hermitian(2), random_hermitian(2)]
    spec = EnsembleSpec(d=2, summands=[Summand.finite_support(atoms, [0.3, 0.7])])
    vt = variance_tensor(spec)
    mu = 0.3 * atoms[0] + 0.7 * atoms[1]
    expected = sum(p * np.kron(a - mu, a - mu) for p, a in zip([0.3, 0.7], atoms))
    np.testing.assert_allclose(vt.kron_form(), expected, atol=1e-10)


def test_build_proxy_scalar():
    proxy = build_proxy(np.array([[0.0]]), VarianceTensor(1, np.array([[4.0]])))
    assert proxy.n_factors == 1
    np.testing.assert_allclose(np.abs(proxy.factors[0]), [[2.0]])


def test_build_proxy_recovers_kron_form():
    a = random_hermitian(3)
    spec = EnsembleSpec(d=3, summands=[Summand.rademacher(a)])
    vt = variance_tensor(spec)
    proxy = build_proxy(spec.mean(), vt)
    assert proxy.n_factors == 1
    np.testing.assert_allclose(proxy.kron_form(), np.kron(a, a), atol=1e-8)


def test_zero_variance_gives_constant_proxy():
    mean = random_hermitian(2)
    proxy = build_proxy(mean, VarianceTensor(2, np.zeros((4, 4))))
    assert proxy.factors == []
    np.testing.assert_allclose(proxy.sample(seed=1, stream=0), mean)


def test_non_psd_rejected():
    bad = np.diag([1.0, -0.5, 1.0, 1.0])
    with pytest.raises(ValueError, match="positive semidefinite"):
        build_proxy(np.zeros((2, 2)), VarianceTensor(2, bad))


def test_factor_count_bounded_by_real_dimension():
    spec = EnsembleSpec(d=2, summands=[
        Summand.gaussian(random_hermitian(2)) for _ in range(7)])
    proxy = proxy_for(spec)
    assert proxy.n_factors <= 4


def test_interpolant_endpoints_and_midpoint():
    x = np.array([[2.0]])
    z = np.array([[0.0]])
    ex = np.array([[1.0]])
    np.testing.assert_allclose(sample_interpolant(1.0, x, z, ex), x)
    np.testing.assert_allclose(sample_interpolant(0.0, x, z, ex), z)
    mid = sample_interpolant(0.5, x, z, ex)
    assert mid[0, 0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sample_interpolant(1.5, x, z, ex)


def test_interpolant_moment_matching():
    mats = [random_hermitian(2), random_hermitian(2)]
    spec = EnsembleSpec(d=2, summands=[Summand.rademacher(m) for m in mats], seed=3)
    proxy = proxy_for(spec)
    n = 40_000
    from univlab.ensembles import sample_sum
    xs = sample_sum(spec, stream=0, size=n)
    zs = proxy.sample(seed=spec.seed, stream=1, size=n)
    ex = spec.mean()
    target = variance_tensor(spec).real_covariance
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        ys = sample_interpolant(t, xs, zs, ex)
        assert is_self_adjoint(ys[0])
        coords = np.stack([vec(y) for y in ys - ex])
        mean_se = coords.std(axis=0).max() / np.sqrt(n)
        assert np.max(np.abs(coords.mean(axis=0) - vec(np.zeros((2, 2))))) <= 4 * mean_se
        cov = coords.T @ coords / n
        prods = np.einsum("ni,nj->nij", coords, coords)
        se = prods.std(axis=0) / np.sqrt(n)
        assert np.max(np.abs(cov - target) - 4 * se) <= 1e-12


def test_proxy_sampling_covariance_fidelity():
    a = random_hermitian(2)
    b = random_hermitian(2)
    spec = EnsembleSpec(d=2, summands=[Summand.rademacher(a), Summand.rademacher(b)], seed=5)
    vt = variance_tensor(spec)
    proxy = build_proxy(spec.mean(), vt)
    n = 40_000
    zs = proxy.sample(seed=9, stream=0, size=n)
    assert all(is_self_adjoint(z, atol=1e-10) for z in zs[:10])
    coords = np.stack([vec(z - proxy.mean) for z in zs])
    cov = coords.T @ coords / n
    prods = np.einsum("ni,nj->nij", coords, coords)
    se = prods.std(axis=0) / np.sqrt(n)
    assert np.max(np.abs(cov - vt.real_covariance) - 4 * se) <= 1e-12


def test_monte_carlo_variance_tensor_agrees_with_exact():
    spec = EnsembleSpec(d=2, summands=[
        Summand.sparse_entry(2, (0, 1), distribution="uniform"),
        Summand.sparse_entry(2, (0, 0), distribution="uniform"),
    ], seed=2)
    exact = variance_tensor(spec, mode="exact")
    mc = variance_tensor(spec, mode="monte_carlo", n_samples=40_000)
    assert mc.method == "monte_carlo" and mc.se > 0
    assert np.max(np.abs(mc.real_covariance - exact.real_covariance)) <= 5 * mc.se


@pytest.mark.parametrize("g", [MatrixFunction.power(2), MatrixFunction.resolvent_square(2j)],
                         ids=["square", "resolvent_square"])
def test_matrix_gaussian_ibp(g):
    # E tr[(Z - EZ) g(Z)] equals the derivative paired with the variance tensor
    rng = np.random.default_rng(12)
    # factor norms ~0.5 keep the resolvent pole far from the sampling range,
    # so the default grid is converged well past the 1e-6 target
    mats = [0.5 * sym(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            for _ in range(2)]
    mean = 0.5 * sym(rng.standard_normal((2, 2)))
    proxy = GaussianProxy(mean=mean, factors=mats)
    zs, wts = proxy_nodes(proxy)
    lhs = 0.0 + 0.0j
    rhs = 0.0 + 0.0j
    from univlab.matrix_calculus import evaluate
    for z, w in zip(zs, wts):
        gz = evaluate(g, z)
        lhs += w * ntrace((z - mean) @ gz)
        for a in proxy.factors:
            rhs += w * ntrace(a @ matrix_difference(g, z, z, a))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_gauss_hermite_cap():
    with pytest.raises(ValueError, match="capped"):
        gauss_hermite_nodes(4)
    pts, wts = gauss_hermite_nodes(2, nodes_per_axis=8)
    assert pts.shape == (64, 2)
    assert wts.sum() == pytest.approx(1.0)
    # grid integrates mixed polynomials of the standard normal exactly
    assert np.dot(wts, pts[:, 0] ** 4) == pytest.approx(3.0)
    assert np.dot(wts, pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(1.0)
