import math

import numpy as np
import pytest

from univlab.ensembles import EnsembleSpec, Summand, rademacher_scalar, two_point_scalar
from univlab.identities import (
    check_bdg,
    check_consolidation,
    check_consolidation_exchangeable,
    check_gm_am,
    check_interpolation_derivative,
    check_linear_regression,
    check_matrix_covariance_identities,
    check_matrix_discrete_ibp,
    check_matrix_gauss_ibp,
    check_rosenthal,
    check_scalar_covariance_identity,
    check_scalar_discrete_ibp,
    check_scalar_gauss_ibp,
    consolidation_coefficients,
    cube_inequality_margins,
    run_suite,
    scalar_ibp_terms,
    w_weight,
)
from univlab.matrix_calculus import MatrixFunction
from univlab.scalar_calculus import ScalarFunction


def finite_pair_scalar():
    return two_point_scalar(2, 0.9, -0.4, 0.35, seed=1)


def test_covariance_identity_linear_reproduces_variance():
    res = check_scalar_covariance_identity(rademacher_scalar(2), ScalarFunction.power(1))
    assert res.lhs == pytest.approx(2.0)
    assert res.passed


def test_covariance_identity_constant_function():
    res = check_scalar_covariance_identity(rademacher_scalar(2), ScalarFunction.power(0))
    assert abs(res.lhs) <= 1e-14 and abs(res.rhs) <= 1e-14


def test_covariance_identity_cubic():
    res = check_scalar_covariance_identity(finite_pair_scalar(), ScalarFunction.power(3))
    assert res.abs_residual <= 1e-12


def test_covariance_identity_monte_carlo():
    res = check_scalar_covariance_identity(
        rademacher_scalar(3, seed=5), ScalarFunction.power(3),
        mode="monte_carlo", n_samples=30_000)
    assert res.se is not None and res.passed


def test_scalar_ibp_quadratic_exact():
    res = check_scalar_discrete_ibp(finite_pair_scalar(), ScalarFunction.power(2))
    assert res.abs_residual <= 1e-12


def test_scalar_ibp_linear_corrections_vanish():
    terms = scalar_ibp_terms(rademacher_scalar(2), ScalarFunction.power(1))
    assert abs(terms.correction1) <= 1e-14
    assert abs(terms.correction2) <= 1e-14


def test_scalar_ibp_quartic_rademacher():
    res = check_scalar_discrete_ibp(rademacher_scalar(2), ScalarFunction.power(4))
    assert res.abs_residual <= 1e-10


def test_w_weight_formula():
    assert w_weight(1.0, 2.0, 0.5, 3) == pytest.approx(3 * 1.5**2 * 1.0)


def test_matrix_covariance_scalar_reduction():
    trace_res, kron_res = check_matrix_covariance_identities(
        rademacher_scalar(2), MatrixFunction.power(1))
    assert trace_res.lhs == pytest.approx(2.0)  # recovers Var[X]
    assert trace_res.passed and kron_res.passed


def test_matrix_covariance_pauli():
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.diag([1.0, -1.0])
    spec = EnsembleSpec(d=2, summands=[
        Summand.finite_support([0.5 * sx, -0.5 * sx], [0.5, 0.5]),
        Summand.finite_support([0.7 * sz, np.zeros((2, 2))], [0.25, 0.75]),
    ])
    for res in check_matrix_covariance_identities(spec, MatrixFunction.power(2)):
        assert res.abs_residual <= 1e-10


def test_matrix_covariance_deterministic():
    a = np.diag([1.0, 2.0])
    spec = EnsembleSpec(d=2, summands=[Summand.finite_support([a], [1.0])] * 2)
    trace_res, kron_res = check_matrix_covariance_identities(spec, MatrixFunction.power(2))
    assert abs(trace_res.lhs) <= 1e-12 and abs(trace_res.rhs) <= 1e-12
    assert kron_res.abs_residual <= 1e-12


def test_matrix_ibp_alpha_zero():
    spec = rademacher_scalar(2)
    res = check_matrix_discrete_ibp(spec, MatrixFunction.power(3), alpha=0.0,
                                    shift=np.array([[0.7]]))
    assert abs(res.lhs) <= 1e-13 and abs(res.rhs) <= 1e-13


def test_matrix_ibp_matches_scalar_ibp_in_one_dimension():
    spec = finite_pair_scalar()
    alpha, shift = 0.6, 0.3
    res = check_matrix_discrete_ibp(spec, MatrixFunction.power(3), alpha=alpha,
                                    shift=np.array([[shift]]))
    g = ScalarFunction.smooth(
        lambda x: (alpha * x + shift) ** 3,
        [lambda x: 3 * alpha * (alpha * x + shift) ** 2,
         lambda x: 6 * alpha**2 * (alpha * x + shift),
         lambda x: 6 * alpha**3 + 0 * x],
    )
    scalar_res = check_scalar_covariance_identity(spec, g)
    assert res.lhs == pytest.approx(scalar_res.lhs, abs=1e-10)
    assert res.abs_residual <= 1e-10


def test_matrix_ibp_resolvent_square():
    spec = EnsembleSpec(d=2, summands=[
        Summand.rademacher(np.array([[0.0, 0.8], [0.8, 0.0]])),
        Summand.rademacher(np.diag([0.6, -0.6])),
    ])
    res = check_matrix_discrete_ibp(spec, MatrixFunction.resolvent_square(2j), alpha=1.0)
    assert res.abs_residual <= 1e-9


def test_matrix_ibp_rejects_real_poles():
    with pytest.raises(ValueError, match="real poles"):
        check_matrix_discrete_ibp(rademacher_scalar(2), MatrixFunction.inverse_power(1))


def test_interpolation_trivial_for_quadratic():
    spec = EnsembleSpec(d=2, summands=[
        Summand.rademacher(np.array([[0.0, 0.8], [0.8, 0.0]])),
        Summand.rademacher(np.diag([0.6, -0.6])),
    ])
    res = check_interpolation_derivative(spec, "power", 0.5, p=1)
    assert abs(res.lhs) <= res.tolerance and abs(res.rhs) <= 1e-12
    assert res.passed


@pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
def test_interpolation_quartic_two_factor(t):
    spec = EnsembleSpec(d=2, summands=[
        Summand.rademacher(np.array([[0.0, 0.8], [0.8, 0.0]])),
        Summand.rademacher(np.diag([0.6, -0.6])),
    ], seed=17)
    res = check_interpolation_derivative(spec, "power", t, p=2)
    assert res.passed, (res.lhs, res.rhs)
    assert res.abs_residual <= 1e-5 * max(abs(res.lhs), abs(res.rhs))


def test_interpolation_resolvent_power():
    # the resolvent integrand needs a finer Gaussian grid than the default
    # before quadrature error drops below the finite-difference target
    spec = rademacher_scalar(2, seed=3)
    res = check_interpolation_derivative(spec, "resolvent_power", 0.5, p=1, zeta=2j,
                                         nodes_per_axis=48)
    assert res.passed
    assert res.abs_residual <= 1e-8


def test_interpolation_rejects_endpoint():
    with pytest.raises(ValueError, match="interior"):
        check_interpolation_derivative(rademacher_scalar(2), "power", 1.0)


def test_gm_am_identity_matrices():
    eye = np.eye(2, dtype=complex)
    res = check_gm_am(eye, eye, eye, 0.5)
    assert res.margin == pytest.approx(0.0, abs=1e-12)


def test_gm_am_theta_zero_psd():
    rng = np.random.default_rng(4)
    base = rng.standard_normal((3, 3))
    b = base @ base.T
    h = np.diag([1.0, -0.5, 2.0])
    res = check_gm_am(np.eye(3), b, h, 0.0)
    assert res.margin == pytest.approx(0.0, abs=1e-10)


def test_gm_am_rejects_indefinite():
    with pytest.raises(ValueError, match="positive semidefinite"):
        check_gm_am(np.diag([1.0, -1.0]), np.eye(2), np.eye(2), 0.5)


def test_consolidation_identity_input():
    eye = np.eye(2, dtype=complex)
    res = check_consolidation(eye, eye, eye, eye, eye, eye, 1, 2, 1)
    assert res.lhs == pytest.approx(1.0)
    assert res.rhs == pytest.approx(1.0)


def test_consolidation_coefficients_convex():
    for exps in ((1, 1, 1), (3, 1, 2), (1, 4, 2), (2, 2, 5)):
        coeffs = consolidation_coefficients(*exps)
        vals = list(coeffs.values())
        assert all(v >= -1e-15 for v in vals)
        assert sum(vals) == pytest.approx(1.0)


def test_consolidation_rejects_non_normal():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]])
    eye = np.eye(2)
    with pytest.raises(ValueError, match="normal"):
        check_consolidation(eye, eye, eye, bad, eye, eye, 1, 1, 1)


def test_consolidation_exchangeable_enumerated():
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = EnsembleSpec(d=2, summands=[
        Summand.rademacher(0.5 * sx),
        Summand.finite_support([np.diag([0.4, -0.1]), np.diag([-0.2, 0.3])], [0.5, 0.5]),
    ])
    for exps in ((1, 1, 1), (2, 1, 1)):
        res = check_consolidation_exchangeable(spec, *exps)
        assert res.margin >= -1e-12


def test_rosenthal_deterministic_positive():
    spec = EnsembleSpec(d=1, summands=[
        Summand.finite_support([np.array([[0.5]])], [1.0]),
        Summand.finite_support([np.array([[1.5]])], [1.0]),
    ])
    res = check_rosenthal(spec, 1, "positive")
    assert res.lhs == pytest.approx(2.0)
    assert res.margin >= 0


def test_rosenthal_scalar_centered_monte_carlo():
    spec = rademacher_scalar(50, seed=9)
    res = check_rosenthal(spec, 1, "centered", mode="monte_carlo", n_samples=20_000)
    # exact fourth moment of the +-1 walk: 3n^2 - 2n
    exact_lhs = (3 * 50**2 - 2 * 50) ** 0.25
    assert res.lhs.real == pytest.approx(exact_lhs, rel=0.02)
    assert res.passed


def test_rosenthal_matrix_positive_exact():
    spec = EnsembleSpec(d=2, summands=[
        Summand.finite_support([np.diag([1.0, 0.5]), np.diag([0.2, 0.8])], [0.5, 0.5]),
        Summand.finite_support([np.diag([0.3, 0.9]), np.diag([1.1, 0.1])], [0.4, 0.6]),
    ])
    res = check_rosenthal(spec, 2, "positive")
    assert res.margin >= -1e-9


def test_rosenthal_invalid_p():
    with pytest.raises(ValueError, match="p"):
        check_rosenthal(rademacher_scalar(2), 1.2, "positive")
    with pytest.raises(ValueError, match="p"):
        check_rosenthal(rademacher_scalar(2), 0.7, "centered")


def test_rosenthal_positivity_enforced():
    with pytest.raises(ValueError, match="positive semidefinite"):
        check_rosenthal(rademacher_scalar(2), 1, "positive")


def test_bdg_scalar():
    for p in (1, 2):
        res = check_bdg(rademacher_scalar(3), p)
        assert res.margin >= -1e-9


def test_scalar_gauss_ibp():
    fns = [ScalarFunction.power(2), ScalarFunction.power(3),
           ScalarFunction.smooth(np.sin, [np.cos])]
    for f in fns:
        res = check_scalar_gauss_ibp(f, mean=0.3, variance=1.7)
        assert res.rel_residual <= 1e-8


def test_matrix_gauss_ibp_small_factors():
    from univlab.gaussian_proxy import GaussianProxy
    rng = np.random.default_rng(3)
    from univlab.util import sym
    factors = [0.4 * sym(rng.standard_normal((2, 2))) for _ in range(3)]
    proxy = GaussianProxy(mean=np.zeros((2, 2), dtype=complex), factors=factors)
    res = check_matrix_gauss_ibp(proxy, MatrixFunction.power(2))
    assert res.passed


def test_cube_margins_nonnegative():
    rng = np.random.default_rng(0)
    for _ in range(500):
        a, b = rng.uniform(0, 10, size=2)
        m1, m2 = cube_inequality_margins(a, b)
        assert m1 >= -1e-12 and m2 >= -1e-12
    with pytest.raises(ValueError):
        cube_inequality_margins(-1.0, 2.0)


def test_linear_regression_check_wrapper():
    res = check_linear_regression(rademacher_scalar(3))
    assert res.passed


def test_result_json_fields():
    res = check_scalar_covariance_identity(rademacher_scalar(2), ScalarFunction.power(2))
    doc = res.to_json()
    for key in ("name", "lhs", "rhs", "residual", "mode", "tolerance", "pass"):
        assert key in doc


def test_suite_filter():
    results = run_suite(seed=0, filter_substr="discrete-ibp")
    assert results
    assert all("discrete-ibp" in r.name for r in results)
    assert all(r.passed for r in results)


def test_default_suite_exact_identities_tight():
    results = run_suite(seed=0)
    assert len(results) >= 50
    for r in results:
        assert r.passed, (r.name, r.abs_residual, r.tolerance)
        if r.kind == "identity" and r.mode == "exact":
            assert r.abs_residual <= 1e-9, (r.name, r.abs_residual)
