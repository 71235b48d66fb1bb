"""Executable checks of the covariance identities and trace inequalities.

Identity checks compare an exactly enumerated left side against an exactly
enumerated right side (or Gaussian quadrature where a Gaussian leg is
involved); inequality checks report the margin bound-minus-value, which must
never be meaningfully negative.  Each check yields an IdentityCheckResult
row that serializes to JSON for the report files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Callable

import numpy as np

from . import rng as rngmod
from .ensembles import (
    EnsembleSpec,
    ExactOracleBudget,
    exact_expectation,
    linear_regression_check,
    sample_triples,
    triple_from_draws,
)
from .gaussian_proxy import (
    GaussianProxy,
    proxy_for,
    proxy_nodes,
    sample_interpolant,
    variance_tensor,
)
from .matrix_calculus import (
    MatrixFunction,
    closed_form_difference,
    evaluate,
    matrix_difference,
    matrix_second_difference,
)
from .scalar_calculus import ScalarFunction, divided_difference
from .spectral_stats import schatten_norm
from .util import matrix_abs, ntrace, psd_power, sym

EXACT_TOL = 1e-12
IBP_TOL = 1e-10
MATRIX_IBP_TOL = 1e-9
INEQ_TOL = 1e-10


@dataclass
class IdentityCheckResult:
    name: str
    lhs: complex
    rhs: complex
    mode: str                 # exact | quadrature | monte_carlo
    tolerance: float
    kind: str = "identity"    # identity | inequality
    se: float | None = None
    residual_override: float | None = None  # e.g. a Frobenius residual of tensors
    details: dict = field(default_factory=dict)

    @property
    def abs_residual(self) -> float:
        if self.residual_override is not None:
            return self.residual_override
        if self.kind == "inequality":
            # violation: how far the value overshoots the bound
            return max(0.0, (self.lhs - self.rhs).real)
        return abs(self.lhs - self.rhs)

    @property
    def rel_residual(self) -> float:
        return self.abs_residual / max(abs(self.lhs), abs(self.rhs), 1.0)

    @property
    def margin(self) -> float:
        return (self.rhs - self.lhs).real

    @property
    def passed(self) -> bool:
        slack = self.tolerance + (4 * self.se if self.se else 0.0)
        return self.abs_residual <= slack

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "mode": self.mode,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "kind": self.kind,
        }
        if self.se is not None:
            doc["se"] = self.se
        if self.details:
            doc["details"] = {k: v for k, v in sorted(self.details.items())}
        return doc


@dataclass
class DiscreteIBPTerms:
    """The three pieces of the discrete integration-by-parts right side."""

    main_term: complex
    correction1: complex
    correction2: complex

    @property
    def total(self) -> complex:
        return self.main_term + self.correction1 + self.correction2


def w_weight(x: float, xp: float, xpp: float, n: int) -> float:
    """Third-order fluctuation weight n (x' - x'')^2 (x' - x)."""
    return n * (xp - xpp) ** 2 * (xp - x)


def _scalar(m: np.ndarray) -> float:
    return float(np.asarray(m).reshape(-1)[0].real)


def _require_scalar_ensemble(spec: EnsembleSpec):
    if spec.d != 1:
        raise ValueError("scalar checks need a d = 1 ensemble")


# ---------------------------------------------------------------------------
# covariance identities

def check_scalar_covariance_identity(spec: EnsembleSpec, f: ScalarFunction,
                                     mode: str = "exact",
                                     budget: ExactOracleBudget | None = None,
                                     n_samples: int = 20_000,
                                     stream: int = 0,
                                     name: str | None = None) -> IdentityCheckResult:
    """Cov(X, f(X)) against (n/2) E[(X - X')(f(X) - f(X'))]."""
    _require_scalar_ensemble(spec)
    n = spec.n
    ex = _scalar(spec.mean())
    if mode == "exact":
        lhs = exact_expectation(
            spec, lambda s, sp, spp, i: (_scalar(s.sum(axis=0)) - ex)
            * f.value(_scalar(s.sum(axis=0))),
            budget, uses=("s",))
        def rhs_fn(s, sp, spp, i):
            x = _scalar(s.sum(axis=0))
            xp = x + _scalar(sp[i]) - _scalar(s[i])
            return (x - xp) * (f.value(x) - f.value(xp))
        rhs = n / 2 * exact_expectation(spec, rhs_fn, budget, uses=("s", "sp", "i"))
        return IdentityCheckResult(name or "scalar-covariance", complex(lhs),
                                   complex(rhs), "exact", EXACT_TOL)
    x, xp, _, _ = sample_triples(spec, stream, n_samples)
    xv = x[:, 0, 0].real
    xpv = xp[:, 0, 0].real
    fvals = np.array([f.value(v) for v in xv])
    fpvals = np.array([f.value(v) for v in xpv])
    lhs_samples = (xv - ex) * fvals
    rhs_samples = n / 2 * (xv - xpv) * (fvals - fpvals)
    diff = lhs_samples - rhs_samples
    se = float(diff.std(ddof=1) / math.sqrt(len(diff)))
    return IdentityCheckResult(name or "scalar-covariance",
                               complex(lhs_samples.mean()), complex(rhs_samples.mean()),
                               "monte_carlo", 0.0, se=se)


def scalar_ibp_terms(spec: EnsembleSpec, f: ScalarFunction,
                     budget: ExactOracleBudget | None = None) -> DiscreteIBPTerms:
    """Exact main and correction terms of the scalar discrete IBP rule."""
    _require_scalar_ensemble(spec)
    n = spec.n
    var = sum(_scalar(s.second_central()) for s in spec.summands)
    mean_df = exact_expectation(
        spec, lambda s, sp, spp, i: f.derivative(_scalar(s.sum(axis=0)), 1),
        budget, uses=("s",))
    main = var * mean_df

    def corr1_fn(s, sp, spp, i):
        x, xp, xpp = (_scalar(v) for v in triple_from_draws(s, sp, spp, i))
        return 0.5 * w_weight(x, xp, xpp, n) * divided_difference(f, [x, xp, xpp])

    def corr2_fn(s, sp, spp, i):
        x, xp, xpp = (_scalar(v) for v in triple_from_draws(s, sp, spp, i))
        return 0.5 * w_weight(x, xp, xpp, n) * divided_difference(f, [x, x, xp])

    corr1 = exact_expectation(spec, corr1_fn, budget)
    corr2 = exact_expectation(spec, corr2_fn, budget)
    return DiscreteIBPTerms(complex(main), complex(corr1), complex(corr2))


def check_scalar_discrete_ibp(spec: EnsembleSpec, f: ScalarFunction,
                              budget: ExactOracleBudget | None = None,
                              name: str | None = None) -> IdentityCheckResult:
    """Cov(X, f(X)) against variance * E Df + second-difference corrections."""
    _require_scalar_ensemble(spec)
    ex = _scalar(spec.mean())
    lhs = exact_expectation(
        spec, lambda s, sp, spp, i: (_scalar(s.sum(axis=0)) - ex)
        * f.value(_scalar(s.sum(axis=0))),
        budget, uses=("s",))
    terms = scalar_ibp_terms(spec, f, budget)
    return IdentityCheckResult(
        name or "scalar-discrete-ibp", complex(lhs), terms.total, "exact", IBP_TOL,
        details={"main_term": terms.main_term.real,
                 "correction1": terms.correction1.real,
                 "correction2": terms.correction2.real})


def check_matrix_covariance_identities(spec: EnsembleSpec, f: MatrixFunction,
                                       budget: ExactOracleBudget | None = None,
                                       name: str | None = None) -> list[IdentityCheckResult]:
    """Trace covariance identity plus the variance-tensor identity."""
    base = name or "matrix-covariance"
    ex = spec.mean()
    n = spec.n

    lhs = exact_expectation(
        spec, lambda s, sp, spp, i: ntrace((s.sum(axis=0) - ex) @ evaluate(f, s.sum(axis=0))),
        budget, uses=("s",))

    def rhs_fn(s, sp, spp, i):
        x = s.sum(axis=0)
        xp = x + sp[i] - s[i]
        return ntrace((x - xp) @ (evaluate(f, x) - evaluate(f, xp)))

    rhs = n / 2 * exact_expectation(spec, rhs_fn, budget, uses=("s", "sp", "i"))
    trace_check = IdentityCheckResult(f"{base}-trace", complex(lhs), complex(rhs),
                                      "exact", EXACT_TOL * 10)

    kron_exact = variance_tensor(spec).kron_form()

    def kron_fn(s, sp, spp, i):
        x = s.sum(axis=0)
        xp = x + sp[i] - s[i]
        return np.kron(x - xp, x - xp)

    kron_pair = n / 2 * exact_expectation(spec, kron_fn, budget, uses=("s", "sp", "i"))
    resid = float(np.linalg.norm(kron_exact - kron_pair, "fro"))
    kron_check = IdentityCheckResult(
        f"{base}-variance-tensor",
        complex(np.linalg.norm(kron_exact, "fro")),
        complex(np.linalg.norm(kron_pair, "fro")),
        "exact", EXACT_TOL * 10,
        residual_override=resid)
    return [trace_check, kron_check]


def check_matrix_discrete_ibp(spec: EnsembleSpec, f: MatrixFunction,
                              alpha: float = 1.0,
                              shift: np.ndarray | None = None,
                              budget: ExactOracleBudget | None = None,
                              name: str | None = None) -> IdentityCheckResult:
    """Three-term matrix IBP for the affine argument alpha X + shift."""
    if f.kind == "inverse_power":
        raise ValueError("the matrix IBP requires a function with no real poles")
    d = spec.d
    n = spec.n
    shift = np.zeros((d, d), dtype=complex) if shift is None else sym(shift)
    ex = spec.mean()

    def y_of(x):
        return alpha * x + shift

    lhs = exact_expectation(
        spec, lambda s, sp, spp, i: ntrace((s.sum(axis=0) - ex) @ evaluate(f, y_of(s.sum(axis=0)))),
        budget, uses=("s",))

    proxy = proxy_for(spec)
    factors = proxy.factors

    def pairing_fn(s, sp, spp, i):
        y = y_of(s.sum(axis=0))
        total = 0.0 + 0.0j
        for a_k in factors:
            total += ntrace(a_k @ matrix_difference(f, y, y, a_k))
        return total

    main = alpha * exact_expectation(spec, pairing_fn, budget, uses=("s",))

    def corr1_fn(s, sp, spp, i):
        x, xp, xpp = triple_from_draws(s, sp, spp, i)
        dd = matrix_second_difference(f, y_of(x), y_of(xp), y_of(xpp), x - xp, xp - xpp)
        return ntrace((x - xp) @ dd)

    def corr2_fn(s, sp, spp, i):
        x, xp, xpp = triple_from_draws(s, sp, spp, i)
        dd = matrix_second_difference(f, y_of(x), y_of(xpp), y_of(xpp), x - xpp, x - xp)
        return ntrace((x - xp) @ dd)

    pref = alpha**2 * n / 2
    corr1 = pref * exact_expectation(spec, corr1_fn, budget)
    corr2 = pref * exact_expectation(spec, corr2_fn, budget)
    terms = DiscreteIBPTerms(complex(main), complex(corr1), complex(corr2))
    return IdentityCheckResult(
        name or "matrix-discrete-ibp", complex(lhs), terms.total, "exact", MATRIX_IBP_TOL,
        details={"main_term": abs(terms.main_term),
                 "correction1": abs(terms.correction1),
                 "correction2": abs(terms.correction2)})


# ---------------------------------------------------------------------------
# interpolation derivative

def _trace_h(kind: str, y: np.ndarray, *, exponent: int = 0,
             zeta: complex = 0j, p: int = 0) -> np.ndarray:
    """ntrace h(Y) for batched self-adjoint Y, via eigenvalues."""
    lam = np.linalg.eigvalsh(y)
    if kind == "power":
        return np.mean(lam.astype(complex) ** exponent, axis=-1)
    # resolvent power |R_zeta|^(2p)
    return np.mean(np.abs(zeta - lam) ** (-2 * p), axis=-1)


def check_interpolation_derivative(spec: EnsembleSpec, h_kind: str, t: float,
                                   *, p: int = 2, zeta: complex = 2j,
                                   fd_step: float = 1e-4,
                                   nodes_per_axis: int = 24,
                                   budget: ExactOracleBudget | None = None,
                                   name: str | None = None) -> IdentityCheckResult:
    """Finite-difference derivative of t -> E ntrace h(Y_t) against the
    closed-form two-term expression (exact in X, Gauss-Hermite in Z).

    h is either the even power a^(2p) (h_kind="power") or the resolvent
    power |R_zeta|^(2p) (h_kind="resolvent_power").
    """
    if not 0.0 < t < 1.0:
        raise ValueError("interpolation time must be interior to (0, 1)")
    if h_kind == "power":
        h_args = {"exponent": 2 * p}
        f = MatrixFunction.power_derivative(p)
    elif h_kind == "resolvent_power":
        h_args = {"zeta": complex(zeta), "p": p}
        f = MatrixFunction.resolvent_power_derivative(zeta, p)
    else:
        raise ValueError("h_kind must be 'power' or 'resolvent_power'")

    ex = spec.mean()
    n = spec.n
    proxy = proxy_for(spec)
    zs, zw = proxy_nodes(proxy, nodes_per_axis)

    def u(tau: float) -> float:
        def fn(s, sp, spp, i):
            y = sample_interpolant(tau, s.sum(axis=0), zs, ex)
            return np.dot(zw, _trace_h(h_kind, y, **h_args))
        return complex(exact_expectation(spec, fn, budget, uses=("s",))).real

    u_mid = u(t)
    udot_fd = (u(t + fd_step) - u(t - fd_step)) / (2 * fd_step)

    def rhs_fn(s, sp, spp, i):
        x, xp, xpp = triple_from_draws(s, sp, spp, i)
        y = sample_interpolant(t, x, zs, ex)
        yp = sample_interpolant(t, xp, zs, ex)
        ypp = sample_interpolant(t, xpp, zs, ex)
        dd1 = closed_form_difference(f, [y, yp, ypp], [x - xp, xp - xpp])
        dd2 = closed_form_difference(f, [y, ypp, ypp], [x - xpp, x - xp])
        vals = ntrace((x - xp) @ dd1) + ntrace((x - xp) @ dd2)
        return np.dot(zw, vals)

    rhs = n * math.sqrt(t) / 4 * complex(exact_expectation(spec, rhs_fn, budget)).real
    # absolute floor covers finite-difference rounding noise when both sides
    # vanish (second moments are matched, so quadratic h is flat in t)
    floor = 1e-9 * max(1.0, abs(u_mid))
    scale = max(abs(udot_fd), abs(rhs))
    return IdentityCheckResult(
        name or f"interpolation-derivative-{h_kind}", complex(udot_fd), complex(rhs),
        "quadrature", 1e-5 * scale + floor,
        details={"t": t, "u": u_mid, "relative_tolerance": 1e-5})


# ---------------------------------------------------------------------------
# trace inequalities

def check_gm_am(a: np.ndarray, b: np.ndarray, h: np.ndarray, theta: float,
                name: str | None = None) -> IdentityCheckResult:
    """|ntr[H A^theta H B^(1-theta)]| <= theta ntr[H^2 A] + (1-theta) ntr[H^2 B]."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    h = sym(h)
    for m, label in ((a, "first"), (b, "second")):
        lam = np.linalg.eigvalsh(m)
        if lam.min() < -1e-10 * max(1.0, lam.max()):
            raise ValueError(f"{label} argument must be positive semidefinite")
    lhs = abs(ntrace(h @ psd_power(a, theta) @ h @ psd_power(b, 1 - theta)))
    rhs = (theta * ntrace(h @ h @ a) + (1 - theta) * ntrace(h @ h @ b)).real
    return IdentityCheckResult(name or "gm-am", complex(lhs), complex(rhs),
                               "exact", INEQ_TOL, kind="inequality",
                               details={"theta": theta})


def consolidation_coefficients(q: int, r: int, s: int) -> dict:
    """Nonnegative weights, summing to one, for the consolidation bound.

    The product is cycled so the middle exponent is maximal; the weights
    follow the Cauchy-Schwarz split (2q/p, (p-2q)/p, (p-2s)/p, 2s/p) halved.
    Keys are (j, k, l): norm factor j, square factor k, power argument l,
    in the original (uncycled) labeling.
    """
    exps = (q, r, s)
    rotation = max(range(3), key=lambda rot: exps[(rot + 1) % 3])
    idx = [(rotation + off) % 3 for off in range(3)]
    q_, r_, s_ = exps[idx[0]], exps[idx[1]], exps[idx[2]]
    p = q + r + s
    coeffs = {
        (idx[0], idx[1], idx[0]): q_ / p,
        (idx[0], idx[1], idx[1]): (p - 2 * q_) / (2 * p),
        (idx[0], idx[2], idx[1]): (p - 2 * s_) / (2 * p),
        (idx[0], idx[2], idx[2]): s_ / p,
    }
    out: dict = {}
    for key, val in coeffs.items():
        out[key] = out.get(key, 0.0) + val
    return out


def check_consolidation(h0, h1, h2, a0, a1, a2, q: int, r: int, s: int,
                        name: str | None = None) -> IdentityCheckResult:
    """|ntr[H0 A0^q H1 A1^r H2 A2^s]| against the convex consolidation bound."""
    if min(q, r, s) < 1:
        raise ValueError("exponents must be positive")
    hs = [sym(m) for m in (h0, h1, h2)]
    amats = [np.asarray(m, dtype=complex) for m in (a0, a1, a2)]
    for m in amats:
        comm = m @ m.conj().T - m.conj().T @ m
        if np.linalg.norm(comm, 2) > 1e-10 * max(1.0, np.linalg.norm(m, 2) ** 2):
            raise ValueError("power arguments must be normal matrices")
    p = q + r + s
    lhs = abs(ntrace(hs[0] @ np.linalg.matrix_power(amats[0], q)
                     @ hs[1] @ np.linalg.matrix_power(amats[1], r)
                     @ hs[2] @ np.linalg.matrix_power(amats[2], s)))
    norms = [float(np.linalg.norm(m, 2)) for m in hs]
    abs_pows = [psd_power(matrix_abs(m), p) for m in amats]
    coeffs = consolidation_coefficients(q, r, s)
    rhs = 0.0
    for (j, k, l), alpha in coeffs.items():
        rhs += alpha * norms[j] * ntrace(hs[k] @ hs[k] @ abs_pows[l]).real
    return IdentityCheckResult(
        name or "consolidation", complex(lhs), complex(rhs), "exact", INEQ_TOL,
        kind="inequality",
        details={"coefficients": {str(k): v for k, v in coeffs.items()},
                 "exponents": [q, r, s]})


def _enumerate_triples(spec: EnsembleSpec, budget: ExactOracleBudget | None):
    """Yield (s, sp, spp, i, weight) over the whole joint support."""
    budget = budget or ExactOracleBudget()
    tables = [sm.atoms_and_probs() for sm in spec.summands]
    sizes = [len(pr) for _, pr in tables]
    if math.prod(sizes) ** 3 * spec.n > budget.max_states:
        raise ValueError("joint triple enumeration exceeds budget")

    def outcomes():
        for combo in product(*(range(k) for k in sizes)):
            seq = np.stack([tables[i][0][c] for i, c in enumerate(combo)])
            weight = math.prod(tables[i][1][c] for i, c in enumerate(combo))
            yield seq, weight

    support = list(outcomes())
    for sd, w_s in support:
        for sp, w_p in support:
            for spp, w_pp in support:
                base = w_s * w_p * w_pp / spec.n
                for i in range(spec.n):
                    yield sd, sp, spp, i, base


def check_consolidation_exchangeable(spec: EnsembleSpec, q: int, r: int, s: int,
                                     budget: ExactOracleBudget | None = None,
                                     name: str | None = None) -> IdentityCheckResult:
    """Exchangeable-triple consolidation with Y = X, W0 = W1 = X - X',
    W2 = X' - X'', both sides enumerated exactly.

    The right side conditions the weight factors on the realized X, so the
    enumeration groups outcomes by the value of X before pairing with |X|^p.
    """
    if min(q, r, s) < 1:
        raise ValueError("exponents must be positive")
    p = q + r + s

    def lhs_fn(sd, sp, spp, i):
        x, xp, xpp = triple_from_draws(sd, sp, spp, i)
        w0 = x - xp
        w2 = xp - xpp
        return ntrace(w0 @ np.linalg.matrix_power(x, q) @ w0
                      @ np.linalg.matrix_power(xp, r) @ w2
                      @ np.linalg.matrix_power(xpp, s))

    lhs = abs(complex(exact_expectation(spec, lhs_fn, budget)))

    perms = list(permutations(range(3)))
    cond_sums: dict = {}   # (perm, j, k) -> {x key -> accumulated weight matrix}
    xpow: dict = {}
    for sd, sp, spp, i, weight in _enumerate_triples(spec, budget):
        x, xp, xpp = triple_from_draws(sd, sp, spp, i)
        key = np.round(np.asarray(x), 9).tobytes()
        if key not in xpow:
            xpow[key] = psd_power(matrix_abs(x), p)
        args = (x, xp, xpp)
        for pi_idx, pi in enumerate(perms):
            t0, t1, t2 = args[pi[0]], args[pi[1]], args[pi[2]]
            ws = (t0 - t1, t0 - t1, t1 - t2)
            norms = [float(np.linalg.norm(w, 2)) for w in ws]
            for j in range(3):
                for k in range(3):
                    slot = cond_sums.setdefault((pi_idx, j, k), {})
                    term = (weight * norms[j]) * (ws[k] @ ws[k])
                    slot[key] = slot[key] + term if key in slot else term

    rhs = max(
        sum(ntrace(mat @ xpow[key]).real for key, mat in slot.items())
        for slot in cond_sums.values())
    return IdentityCheckResult(
        name or "consolidation-exchangeable", complex(lhs), complex(rhs),
        "exact", INEQ_TOL, kind="inequality", details={"exponents": [q, r, s]})


# ---------------------------------------------------------------------------
# moment inequalities

def _norm_x(spec: EnsembleSpec, order: float, mode: str, budget, n_samples, stream):
    """Normalized L_order norm of the sum, exact or Monte Carlo."""
    if mode == "exact":
        def fn(s, sp, spp, i):
            lam = np.linalg.eigvalsh(s.sum(axis=0))
            return float(np.mean(np.abs(lam) ** order))
        val = complex(exact_expectation(spec, fn, budget, uses=("s",))).real
        return val ** (1.0 / order), 0.0
    from .ensembles import sample_sum
    draws = sample_sum(spec, stream=stream, size=n_samples)
    lam = np.abs(np.linalg.eigvalsh(draws))
    inner = np.mean(lam**order, axis=-1)
    mean = float(inner.mean())
    se_inner = float(inner.std(ddof=1) / math.sqrt(len(inner)))
    val = mean ** (1.0 / order)
    se = se_inner * val / (order * mean) if mean > 0 else 0.0
    return val, se


def _max_summand_norm(spec: EnsembleSpec, order: float, mode: str, budget,
                      n_samples, stream, absolute: bool = True):
    """|| max_i ||S_i|| ||_order, exact by joint enumeration or Monte Carlo."""
    if mode == "exact":
        def fn(s, sp, spp, i):
            return max(float(np.linalg.norm(m, 2)) for m in s) ** order
        val = complex(exact_expectation(spec, fn, budget, uses=("s",))).real
        return val ** (1.0 / order), 0.0
    vals = np.zeros(n_samples)
    for i, summand in enumerate(spec.summands):
        gen = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIMARY, stream, i)
        draws = summand.sample(gen, n_samples)
        nrm = np.abs(np.linalg.eigvalsh(draws)).max(axis=-1)
        np.maximum(vals, nrm, out=vals)
    inner = vals**order
    mean = float(inner.mean())
    se_inner = float(inner.std(ddof=1) / math.sqrt(len(inner)))
    val = mean ** (1.0 / order)
    se = se_inner * val / (order * mean) if mean > 0 else 0.0
    return val, se


def check_rosenthal(spec: EnsembleSpec, p: float, case: str,
                    variant: str | None = None, mode: str = "exact",
                    budget: ExactOracleBudget | None = None,
                    n_samples: int = 20_000, stream: int = 0,
                    name: str | None = None) -> IdentityCheckResult:
    """Moment bound for an independent sum: positive or centered case.

    Positive case controls ||X||_2p by the mean plus a maximal-summand term;
    centered case controls ||X||_4p by a variance term plus a maximal term.
    Scalar and matrix variants share the code path (d = 1 is the scalar one).
    """
    variant = variant or ("scalar" if spec.d == 1 else "matrix")
    if variant == "scalar" and spec.d != 1:
        raise ValueError("scalar variant needs a d = 1 ensemble")
    if case == "positive":
        if not (p == 1 or p >= 1.5):
            raise ValueError("positive case is stated for p = 1 or p >= 1.5")
        for s in spec.summands:
            atoms, _ = s.atoms_and_probs()
            if np.min(np.linalg.eigvalsh(atoms)) < -1e-12:
                raise ValueError("positive case needs positive semidefinite summands")
        lhs, lhs_se = _norm_x(spec, 2 * p, mode, budget, n_samples, stream)
        mean_norm = schatten_norm(spec.mean(), 2 * p)
        max_norm, max_se = _max_summand_norm(spec, 2 * p, mode, budget, n_samples, stream)
        const = math.sqrt(2 * p - 1) if variant == "scalar" else math.sqrt(4 * p - 2)
        rhs = (math.sqrt(mean_norm) + const * math.sqrt(max_norm)) ** 2
        se = lhs_se + (const * max_se if max_norm > 0 else 0.0)
    elif case == "centered":
        if not (p in (0.5, 1) or p >= 1.5):
            raise ValueError("centered case is stated for p in {1/2, 1} or p >= 1.5")
        for s in spec.summands:
            if np.max(np.abs(s.mean())) > 1e-12:
                raise ValueError("centered case needs centered summands")
        lhs, lhs_se = _norm_x(spec, 4 * p, mode, budget, n_samples, stream)
        second = np.zeros((spec.d, spec.d), dtype=complex)
        for s in spec.summands:
            second += s.second_central()
        var_term = schatten_norm(psd_power(second, 0.5), 4 * p)
        max_norm, max_se = _max_summand_norm(spec, 4 * p, mode, budget, n_samples, stream)
        c2 = math.sqrt((4 * p - 1) * (2 * p - 1)) if variant == "scalar" \
            else math.sqrt((4 * p - 1) * (4 * p - 2))
        rhs = math.sqrt(4 * p - 1) * var_term + c2 * max_norm
        se = lhs_se + c2 * max_se
    else:
        raise ValueError("case must be 'positive' or 'centered'")
    tol = 1e-9 if mode == "exact" else 0.0
    return IdentityCheckResult(
        name or f"rosenthal-{variant}-{case}", complex(lhs), complex(rhs),
        mode if mode == "exact" else "monte_carlo", tol, kind="inequality",
        se=None if mode == "exact" else se, details={"p": p})


def check_bdg(spec: EnsembleSpec, p: float,
              budget: ExactOracleBudget | None = None,
              name: str | None = None) -> IdentityCheckResult:
    """Scalar BDG bound: ||X||_2p <= sqrt(2p-1) ||V||_p^(1/2) with the
    half empirical, half expected variance proxy V."""
    _require_scalar_ensemble(spec)
    if not (p == 1 or p >= 1.5):
        raise ValueError("BDG bound is stated for p = 1 or p >= 1.5")
    for s in spec.summands:
        if abs(_scalar(s.mean())) > 1e-12:
            raise ValueError("BDG bound needs centered summands")
    second = [_scalar(s.second_central()) for s in spec.summands]

    lhs = complex(exact_expectation(
        spec, lambda s, sp, spp, i: abs(_scalar(s.sum(axis=0))) ** (2 * p),
        budget, uses=("s",))).real ** (1 / (2 * p))

    def proxy_fn(s, sp, spp, i):
        v = 0.5 * sum(_scalar(s[j]) ** 2 + second[j] for j in range(spec.n))
        return v**p

    vnorm = complex(exact_expectation(spec, proxy_fn, budget, uses=("s",))).real ** (1 / p)
    rhs = math.sqrt(2 * p - 1) * math.sqrt(vnorm)
    return IdentityCheckResult(name or "bdg-scalar", complex(lhs), complex(rhs),
                               "exact", 1e-9, kind="inequality", details={"p": p})


# ---------------------------------------------------------------------------
# Gaussian integration by parts (scalar, by quadrature)

def check_scalar_gauss_ibp(f: ScalarFunction, mean: float, variance: float,
                           nodes: int = 48, name: str | None = None) -> IdentityCheckResult:
    """Cov(Z, f(Z)) = Var[Z] E[Df(Z)] for Gaussian Z, by Gauss-Hermite."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    z = mean + math.sqrt(variance) * x
    fz = np.array([f.value(v) for v in z])
    dfz = np.array([f.derivative(v, 1) for v in z])
    lhs = np.dot(w, (z - mean) * fz)
    rhs = variance * np.dot(w, dfz)
    scale = max(abs(lhs), abs(rhs), 1.0)
    return IdentityCheckResult(name or "gauss-ibp-scalar", complex(lhs), complex(rhs),
                               "quadrature", 1e-8 * scale)


def check_matrix_gauss_ibp(proxy: GaussianProxy, g: MatrixFunction,
                           nodes_per_axis: int = 24,
                           name: str | None = None) -> IdentityCheckResult:
    """E ntr[(Z-EZ) g(Z)] = <E Dg(Z), Var(x)[Z]> for a factorized proxy."""
    zs, wts = proxy_nodes(proxy, nodes_per_axis)
    lhs = 0.0 + 0.0j
    rhs = 0.0 + 0.0j
    for z, w in zip(zs, wts):
        gz = evaluate(g, z)
        lhs += w * ntrace((z - proxy.mean) @ gz)
        for a in proxy.factors:
            rhs += w * ntrace(a @ matrix_difference(g, z, z, a))
    scale = max(abs(lhs), abs(rhs), 1e-3)
    return IdentityCheckResult(name or "gauss-ibp-matrix", lhs, rhs,
                               "quadrature", 1e-6 * scale)


def cube_inequality_margins(a: float, b: float) -> tuple[float, float]:
    """Margins of |a^3-b^3| >= |a-b|^3 and >= |a-b| max(a^2, b^2), a, b >= 0."""
    if a < 0 or b < 0:
        raise ValueError("cube inequalities hold for nonnegative arguments")
    gap = abs(a**3 - b**3)
    return gap - abs(a - b) ** 3, gap - abs(a - b) * max(a * a, b * b)


def check_linear_regression(spec: EnsembleSpec,
                            name: str | None = None) -> IdentityCheckResult:
    resid = linear_regression_check(spec, "exact")
    return IdentityCheckResult(name or "linear-regression", complex(resid), 0.0,
                               "exact", EXACT_TOL)


# ---------------------------------------------------------------------------
# default suite

def _default_ensembles() -> dict:
    from .ensembles import EnsembleSpec, Summand, rademacher_scalar, two_point_scalar
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]])
    pauli = EnsembleSpec(d=2, summands=[
        Summand.finite_support([0.6 * sx, -0.4 * sx], [0.4, 0.6]),
        Summand.finite_support([0.5 * sz + 0.1 * np.eye(2), -0.5 * sz], [0.5, 0.5]),
    ], seed=101)
    mixed = EnsembleSpec(d=2, summands=[
        Summand.rademacher(0.7 * sx),
        Summand.rademacher(0.5 * sz),
        Summand.finite_support([0.4 * sy, -0.2 * sy], [1 / 3, 2 / 3]),
    ], seed=102)
    coeff_pair = EnsembleSpec(d=2, summands=[
        Summand.rademacher(0.8 * sx), Summand.rademacher(0.6 * sz)], seed=103)
    positive_scalar = two_point_scalar(3, 1.0, 0.25, 0.4, seed=104)
    positive_matrix = EnsembleSpec(d=2, summands=[
        Summand.finite_support([np.diag([1.0, 0.5]), np.diag([0.25, 0.75])], [0.5, 0.5]),
        Summand.finite_support([np.diag([0.5, 1.5]), np.diag([1.0, 0.0])], [0.3, 0.7]),
    ], seed=105)
    return {
        "rademacher2": rademacher_scalar(2, seed=100),
        "rademacher3": rademacher_scalar(3, seed=100),
        "skewed3": two_point_scalar(3, 1.0, -0.5, 0.3, seed=100),
        "pauli": pauli,
        "mixed3": mixed,
        "coeff-pair": coeff_pair,
        "positive-scalar": positive_scalar,
        "positive-matrix": positive_matrix,
    }


def default_suite(seed: int = 0) -> list[tuple[str, Callable[[], object]]]:
    """The named checks of the stock verification suite.

    Small enumerable ensembles of our choosing (no canonical family exists):
    scalar Rademacher and skewed two-point models, plus non-commuting
    two-dimensional finite-support and coefficient models.
    """
    ens = _default_ensembles()
    suite: list[tuple[str, Callable]] = []

    scalar_fs = {
        "identity": ScalarFunction.power(1),
        "square": ScalarFunction.power(2),
        "cube": ScalarFunction.power(3),
        "quartic": ScalarFunction.power(4),
        "sin": ScalarFunction.smooth(
            np.sin, [np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a)]),
    }
    for ens_name in ("rademacher2", "rademacher3", "skewed3"):
        spec = ens[ens_name]
        for f_name in ("identity", "cube", "sin"):
            nm = f"scalar-covariance-{ens_name}-{f_name}"
            suite.append((nm, lambda s=spec, f=scalar_fs[f_name], n=nm:
                          check_scalar_covariance_identity(s, f, name=n)))
        for f_name in ("identity", "square", "quartic", "sin"):
            nm = f"scalar-discrete-ibp-{ens_name}-{f_name}"
            suite.append((nm, lambda s=spec, f=scalar_fs[f_name], n=nm:
                          check_scalar_discrete_ibp(s, f, name=n)))

    matrix_fs = {
        "square": MatrixFunction.power(2),
        "cube": MatrixFunction.power(3),
        "resolvent-square": MatrixFunction.resolvent_square(2j),
    }
    for ens_name in ("pauli", "mixed3", "coeff-pair"):
        spec = ens[ens_name]
        for f_name in ("square", "resolvent-square"):
            nm = f"matrix-covariance-{ens_name}-{f_name}"
            suite.append((nm, lambda s=spec, f=matrix_fs[f_name], n=nm:
                          check_matrix_covariance_identities(s, f, name=n)))
        for f_name in ("cube", "resolvent-square"):
            nm = f"matrix-discrete-ibp-{ens_name}-{f_name}"
            suite.append((nm, lambda s=spec, f=matrix_fs[f_name], n=nm:
                          check_matrix_discrete_ibp(s, f, alpha=0.8, name=n)))

    for ens_name in ("rademacher2", "rademacher3", "skewed3", "pauli", "mixed3"):
        nm = f"linear-regression-{ens_name}"
        suite.append((nm, lambda s=ens[ens_name], n=nm: check_linear_regression(s, name=n)))

    suite.append(("interpolation-derivative-scalar-quartic",
                  lambda: check_interpolation_derivative(
                      ens["skewed3"], "power", 0.5, p=2,
                      name="interpolation-derivative-scalar-quartic")))
    suite.append(("interpolation-derivative-matrix-quartic",
                  lambda: check_interpolation_derivative(
                      ens["coeff-pair"], "power", 0.5, p=2,
                      name="interpolation-derivative-matrix-quartic")))

    def randomized_gm_am(count=1000):
        gen = rngmod.stream_rng(seed, 201)
        worst = None
        for _ in range(count):
            d = int(gen.integers(1, 9))
            base1 = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
            base2 = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
            res = check_gm_am(base1 @ base1.conj().T, base2 @ base2.conj().T,
                              sym(gen.standard_normal((d, d))), float(gen.uniform()),
                              name="gm-am-randomized")
            if worst is None or res.margin < worst.margin:
                worst = res
        worst.details["instances"] = count
        return worst

    suite.append(("gm-am-randomized", randomized_gm_am))

    def randomized_consolidation(count=1000):
        gen = rngmod.stream_rng(seed, 202)
        worst = None
        for _ in range(count):
            d = int(gen.integers(1, 7))
            hs = [sym(gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d)))
                  for _ in range(3)]
            amats = []
            for _ in range(3):
                ginibre = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
                u, _ = np.linalg.qr(ginibre)
                lam = gen.standard_normal(d) + 1j * gen.standard_normal(d)
                amats.append(u @ np.diag(lam) @ u.conj().T)
            exps = gen.integers(1, 4, size=3)
            res = check_consolidation(*hs, *amats, *map(int, exps),
                                      name="consolidation-randomized")
            if worst is None or res.margin < worst.margin:
                worst = res
        worst.details["instances"] = count
        return worst

    suite.append(("consolidation-randomized", randomized_consolidation))
    for exps in ((1, 1, 1), (2, 1, 1)):
        nm = f"consolidation-exchangeable-{''.join(map(str, exps))}"
        suite.append((nm, lambda e=exps, n=nm:
                      check_consolidation_exchangeable(ens["pauli"], *e, name=n)))

    suite.append(("rosenthal-scalar-positive-p1",
                  lambda: check_rosenthal(ens["positive-scalar"], 1, "positive",
                                          name="rosenthal-scalar-positive-p1")))
    suite.append(("rosenthal-scalar-positive-p2",
                  lambda: check_rosenthal(ens["positive-scalar"], 2, "positive",
                                          name="rosenthal-scalar-positive-p2")))
    suite.append(("rosenthal-scalar-centered-p1",
                  lambda: check_rosenthal(ens["rademacher3"], 1, "centered",
                                          name="rosenthal-scalar-centered-p1")))
    suite.append(("rosenthal-matrix-positive-p1",
                  lambda: check_rosenthal(ens["positive-matrix"], 1, "positive",
                                          name="rosenthal-matrix-positive-p1")))
    suite.append(("rosenthal-matrix-positive-p2",
                  lambda: check_rosenthal(ens["positive-matrix"], 2, "positive",
                                          name="rosenthal-matrix-positive-p2")))
    suite.append(("rosenthal-matrix-centered-p1",
                  lambda: check_rosenthal(ens["coeff-pair"], 1, "centered",
                                          name="rosenthal-matrix-centered-p1")))
    suite.append(("bdg-scalar-p1", lambda: check_bdg(ens["rademacher3"], 1,
                                                     name="bdg-scalar-p1")))
    suite.append(("bdg-scalar-p2", lambda: check_bdg(ens["rademacher3"], 2,
                                                     name="bdg-scalar-p2")))

    for f_name in ("square", "cube", "sin"):
        nm = f"gauss-ibp-scalar-{f_name}"
        suite.append((nm, lambda f=scalar_fs[f_name], n=nm:
                      check_scalar_gauss_ibp(f, mean=0.3, variance=1.7, name=n)))

    def matrix_ibp_gauss(g_name, g):
        proxy = proxy_for(ens["coeff-pair"])
        return check_matrix_gauss_ibp(proxy, g, name=f"gauss-ibp-matrix-{g_name}")

    suite.append(("gauss-ibp-matrix-square",
                  lambda: matrix_ibp_gauss("square", MatrixFunction.power(2))))
    suite.append(("gauss-ibp-matrix-resolvent-square",
                  lambda: matrix_ibp_gauss("resolvent-square",
                                           MatrixFunction.resolvent_square(2j))))

    def cube_random(count=1000):
        gen = rngmod.stream_rng(seed, 203)
        worst = math.inf
        for _ in range(count):
            a, b = gen.uniform(0, 5, size=2)
            worst = min(worst, *cube_inequality_margins(float(a), float(b)))
        return IdentityCheckResult("cube-inequalities", complex(-worst), 0.0,
                                   "exact", INEQ_TOL, kind="inequality",
                                   details={"instances": count})

    suite.append(("cube-inequalities", cube_random))
    return suite


def run_suite(suite=None, seed: int = 0,
              filter_substr: str | None = None) -> list[IdentityCheckResult]:
    """Run (a filtered view of) the default suite, flattening multi-results."""
    suite = default_suite(seed) if suite is None else suite
    results: list[IdentityCheckResult] = []
    for name, fn in suite:
        if filter_substr and filter_substr not in name:
            continue
        out = fn()
        if isinstance(out, list):
            results.extend(out)
        else:
            results.append(out)
    return results
