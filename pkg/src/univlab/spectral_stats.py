"""Ensemble statistics and spectral observables.

Every statistic the comparison theorems consume lives here: the matrix
variance and its Schatten-p relatives, uniform bounds on summand
deviations, third-moment sums, the weak variance, L_q norms of random
matrices, the Cauchy transform, and the empirical mean spectral
distribution.  Each field carries a provenance tag saying whether it was
computed exactly, estimated by Monte Carlo (with standard error), or found
by search (a lower bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .ensembles import (
    BudgetExceededError,
    EnsembleSpec,
    ExactOracleBudget,
    sample_sum,
)
from .util import config_hash, ntrace

_INVARIANT_TOL = 1e-9


@dataclass
class Provenance:
    method: str  # exact | monte_carlo | search_lower_bound
    se: float | None = None

    def to_json(self):
        out = {"method": self.method}
        if self.se is not None:
            out["se"] = self.se
        return out


@dataclass
class LqNorm:
    value: float
    q: float
    inner_mean: float    # mean over samples of ntrace |Y|^q
    inner_se: float      # standard error of that mean

    @property
    def value_se(self) -> float:
        """Delta-method standard error of the norm itself."""
        if self.inner_mean <= 0:
            return 0.0
        return self.inner_se * self.value / (self.q * self.inner_mean)


def _singular_values(samples: np.ndarray) -> np.ndarray:
    """Singular values per sample via the Hermitian product Y*Y."""
    samples = np.asarray(samples, dtype=complex)
    gram = samples.conj().swapaxes(-2, -1) @ samples
    w = np.linalg.eigvalsh(gram)
    return np.sqrt(np.clip(w, 0.0, None))


def lq_norm(samples: np.ndarray, q: float) -> LqNorm:
    """(E ntrace |Y|^q)^(1/q) over the sample set, with the inner mean's SE."""
    if q <= 0:
        raise ValueError("norm order must be positive")
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.size == 0:
        raise ValueError("need at least one sample")
    sv = _singular_values(samples)
    inner = np.mean(sv**q, axis=-1)
    mean = float(np.mean(inner))
    se = float(np.std(inner, ddof=1) / np.sqrt(len(inner))) if len(inner) > 1 else 0.0
    return LqNorm(value=mean ** (1.0 / q), q=q, inner_mean=mean, inner_se=se)


def cauchy_transform(samples: np.ndarray, zeta: complex) -> tuple[complex, float]:
    """Mean normalized trace of the resolvent, with its standard error.

    Every per-sample transform obeys |G| <= 1/|Im zeta|; that is asserted.
    """
    zeta = complex(zeta)
    if zeta.imag == 0:
        raise ValueError("Cauchy transform needs Im zeta != 0")
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.size == 0:
        raise ValueError("need at least one sample")
    d = samples.shape[-1]
    eye = np.eye(d, dtype=complex)
    res = np.linalg.solve(zeta * eye - samples, np.broadcast_to(eye, samples.shape))
    vals = ntrace(res)
    bound = 1.0 / abs(zeta.imag)
    if np.max(np.abs(vals)) > bound * (1 + 1e-8):
        raise AssertionError("per-sample Cauchy transform exceeded the uniform bound")
    mean = complex(np.mean(vals))
    if len(vals) > 1:
        se = float(np.sqrt((np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1)) / len(vals)))
    else:
        se = 0.0
    return mean, se


@dataclass
class SpectralHistogram:
    edges: np.ndarray
    masses: np.ndarray
    n_matrices: int
    n_eigenvalues: int

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to one")

    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    def moment(self, k: int) -> float:
        return float(np.dot(self.centers() ** k, self.masses))

    def to_json(self) -> dict:
        return {"edges": self.edges.tolist(), "masses": self.masses.tolist(),
                "n_matrices": self.n_matrices, "n_eigenvalues": self.n_eigenvalues}

    def to_csv(self) -> str:
        lines = ["bin_center,mass"]
        lines += [f"{c!r},{m!r}" for c, m in zip(self.centers(), self.masses)]
        return "\n".join(lines) + "\n"


def empirical_msd(samples: np.ndarray, bins: int | None = None) -> SpectralHistogram:
    """Pooled eigenvalue histogram, mass one. Freedman-Diaconis bins by default."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.size == 0:
        raise ValueError("need at least one sample")
    eigs = np.linalg.eigvalsh(samples).ravel()
    if bins is None:
        edges = np.histogram_bin_edges(eigs, bins="fd")
        if len(edges) < 2 or edges[0] == edges[-1]:
            edges = np.array([eigs.min() - 0.5, eigs.max() + 0.5])
    else:
        if bins < 1:
            raise ValueError("bin count must be positive")
        lo, hi = eigs.min(), eigs.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    counts, edges = np.histogram(eigs, bins=edges)
    return SpectralHistogram(edges=edges, masses=counts / counts.sum(),
                             n_matrices=len(samples), n_eigenvalues=eigs.size)


# ---------------------------------------------------------------------------
# ensemble statistics

@dataclass
class StatisticsReport:
    d: int
    n: int
    ensemble_hash: str
    sigma2: float
    sigma_star2: float
    L: float
    L_inf: float
    M3: float
    sigma2_2p: dict = field(default_factory=dict)
    L_2p: dict = field(default_factory=dict)
    M2p: dict = field(default_factory=dict)
    M3_p3: dict = field(default_factory=dict)  # scalar ensembles only
    provenance: dict = field(default_factory=dict)

    def _slack(self, key: str) -> float:
        prov = self.provenance.get(key)
        return 4 * prov.se if prov is not None and prov.se else 0.0

    def validate(self) -> None:
        tol = _INVARIANT_TOL
        for name in ("sigma2", "sigma_star2", "M3"):
            if getattr(self, name) < -tol:
                raise AssertionError(f"{name} must be nonnegative")
        for p, v in self.sigma2_2p.items():
            if v > self.sigma2 + tol:
                raise AssertionError(f"sigma2_2p[{p}]={v} exceeds sigma2={self.sigma2}")
        if math.isfinite(self.L):
            for p, v in self.L_2p.items():
                if v > 2 * self.L + tol + self._slack(f"L_2p[{p}]"):
                    raise AssertionError(f"L_2p[{p}]={v} exceeds 2L={2 * self.L}")

    def to_json(self) -> dict:
        return {
            "d": self.d, "n": self.n, "ensemble_hash": self.ensemble_hash,
            "sigma2": self.sigma2, "sigma_star2": self.sigma_star2,
            "L": self.L, "L_inf": self.L_inf, "M3": self.M3,
            "sigma2_2p": {str(k): v for k, v in self.sigma2_2p.items()},
            "L_2p": {str(k): v for k, v in self.L_2p.items()},
            "M2p": {str(k): v for k, v in self.M2p.items()},
            "M3_p3": {str(k): v for k, v in self.M3_p3.items()},
            "provenance": {k: p.to_json() for k, p in self.provenance.items()},
        }


def schatten_norm(a: np.ndarray, p: float) -> float:
    """Normalized Schatten norm of one self-adjoint matrix."""
    lam = np.abs(np.linalg.eigvalsh(np.asarray(a, dtype=complex)))
    if math.isinf(p):
        return float(lam.max(initial=0.0))
    return float(np.mean(lam**p) ** (1.0 / p))


def weak_variance(spec: EnsembleSpec, restarts: int = 64,
                  tol: float = 1e-8, max_iter: int = 500) -> tuple[float, Provenance]:
    """sup over unit vectors of the summed quadratic-form variances.

    Exact for d = 1; otherwise projected gradient ascent from `restarts`
    random unit vectors, reported as a lower bound.
    """
    terms = []  # (weight, matrix) with Var[u* S u] = sum_t w_t (u* B_t u)^2
    for s in spec.summands:
        terms.extend(s.variance_terms())
    if spec.d == 1:
        total = sum(w * float(b[0, 0].real) ** 2 for w, b in terms)
        return total, Provenance("exact")

    weights = np.array([w for w, _ in terms])
    mats = np.stack([b for _, b in terms])

    def objective(u):
        quad = np.einsum("i,tij,j->t", u.conj(), mats, u).real
        return float(np.dot(weights, quad**2)), quad

    def gradient(u, quad):
        return 2.0 * np.einsum("t,t,tij,j->i", weights, quad, mats, u)

    gen = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_SEARCH)
    best = 0.0
    for _ in range(restarts):
        u = gen.standard_normal(spec.d) + 1j * gen.standard_normal(spec.d)
        u /= np.linalg.norm(u)
        step = 0.5
        val, quad = objective(u)
        for _ in range(max_iter):
            g = gradient(u, quad)
            tangent = g - u * np.vdot(u, g).real
            if np.linalg.norm(tangent) <= tol * max(1.0, abs(val)):
                break
            cand = u + step * g
            cand /= np.linalg.norm(cand)
            cval, cquad = objective(cand)
            if cval > val:
                u, val, quad = cand, cval, cquad
                step *= 1.5
            else:
                step *= 0.5
                if step < 1e-14:
                    break
        best = max(best, val)
    return best, Provenance("search_lower_bound")


def _joint_pair_enumeration(spec: EnsembleSpec, p_list, budget: ExactOracleBudget):
    """Exact L_2p / M_2p / scalar M_{3,p/3} by enumerating (S, S') jointly."""
    atoms, probs = [], []
    for s in spec.summands:
        a, p = s.atoms_and_probs()
        atoms.append(a)
        probs.append(p)
    sizes = [len(p) for p in probs]
    if math.prod(k * k for k in sizes) > budget.max_states:
        raise BudgetExceededError("joint pair enumeration exceeds budget")
    maxp = max(p_list)
    exp_max2p = {p: 0.0 for p in p_list}     # E[(max_i ||dS_i||)^(2p)]
    exp_m2p = {p: 0.0 for p in p_list}       # E ntrace |sum dS_i^2|^p
    exp_m3p3 = {p: 0.0 for p in p_list}      # d=1: E (sum |dS_i|^3)^(p/3)
    pair_choices = [list(product(range(k), repeat=2)) for k in sizes]
    for combo in product(*pair_choices):
        weight = 1.0
        total = np.zeros((spec.d, spec.d), dtype=complex)
        maxnorm = 0.0
        cube_sum = 0.0
        for i, (ia, ib) in enumerate(combo):
            weight *= probs[i][ia] * probs[i][ib]
            delta = atoms[i][ia] - atoms[i][ib]
            total += delta @ delta
            nrm = float(np.linalg.norm(delta, 2))
            maxnorm = max(maxnorm, nrm)
            if spec.d == 1:
                cube_sum += abs(delta[0, 0].real) ** 3
        lam = np.abs(np.linalg.eigvalsh(total))
        for p in p_list:
            exp_max2p[p] += weight * maxnorm ** (2 * p)
            exp_m2p[p] += weight * float(np.mean(lam**p))
            if spec.d == 1:
                exp_m3p3[p] += weight * cube_sum ** (p / 3.0)
    l2p = {p: exp_max2p[p] ** (1.0 / (2 * p)) for p in p_list}
    m2p = {p: exp_m2p[p] ** (1.0 / p) for p in p_list}
    m3p3 = {p: exp_m3p3[p] ** (3.0 / p) for p in p_list} if spec.d == 1 else {}
    return l2p, m2p, m3p3


def _joint_pair_monte_carlo(spec: EnsembleSpec, p_list, n_samples: int, stream: int):
    """Monte Carlo L_2p / M_2p / scalar M_{3,p/3} streaming over summands."""
    n_samples = int(n_samples)
    total = np.zeros((n_samples, spec.d, spec.d), dtype=complex)
    maxnorm = np.zeros(n_samples)
    cube_sum = np.zeros(n_samples)
    for i, summand in enumerate(spec.summands):
        g1 = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIMARY, stream, i)
        g2 = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIME, stream, i)
        delta = summand.sample(g1, n_samples) - summand.sample(g2, n_samples)
        total += delta @ delta
        if spec.d == 1:
            nrm = np.abs(delta[:, 0, 0].real)
        else:
            nrm = np.abs(np.linalg.eigvalsh(delta)).max(axis=-1)
        np.maximum(maxnorm, nrm, out=maxnorm)
        cube_sum += nrm**3 if spec.d == 1 else 0.0
    lam = np.abs(np.linalg.eigvalsh(total))
    l2p, m2p, m3p3 = {}, {}, {}
    se = {}
    for p in p_list:
        inner = maxnorm ** (2 * p)
        mean = float(inner.mean())
        val = mean ** (1.0 / (2 * p))
        se_inner = float(inner.std(ddof=1) / np.sqrt(n_samples))
        l2p[p] = val
        se[f"L_2p[{p}]"] = se_inner * val / (2 * p * mean) if mean > 0 else 0.0

        inner = np.mean(lam**p, axis=-1)
        mean = float(inner.mean())
        val = mean ** (1.0 / p)
        se_inner = float(inner.std(ddof=1) / np.sqrt(n_samples))
        m2p[p] = val
        se[f"M2p[{p}]"] = se_inner * val / (p * mean) if mean > 0 else 0.0

        if spec.d == 1:
            inner = cube_sum ** (p / 3.0)
            mean = float(inner.mean())
            val = mean ** (3.0 / p) if mean > 0 else 0.0
            se_inner = float(inner.std(ddof=1) / np.sqrt(n_samples))
            m3p3[p] = val
            se[f"M3_p3[{p}]"] = (3.0 / p) * se_inner * val / mean if mean > 0 else 0.0
    return l2p, m2p, m3p3, se


def ensemble_statistics(spec: EnsembleSpec, p_list: Sequence[int] = (2,),
                        mode: str = "exact", n_samples: int = 20_000,
                        stream: int = 0,
                        budget: ExactOracleBudget | None = None) -> StatisticsReport:
    """All statistics of the ensemble, with per-field provenance.

    Variance-type and third-moment fields are exact for every summand model.
    The joint fields (L_2p, M_2p, scalar M_{3,p/3}) are exact when the
    ensemble is enumerable within budget (mode="exact"), else Monte Carlo.
    """
    p_list = sorted(set(int(p) for p in p_list))
    if any(p < 1 for p in p_list):
        raise ValueError("p values must be positive integers")
    budget = budget or ExactOracleBudget()

    second = np.zeros((spec.d, spec.d), dtype=complex)
    for s in spec.summands:
        second += s.second_central()
    sigma2 = schatten_norm(second, math.inf)
    sigma2_2p = {p: schatten_norm(second, p) for p in p_list}
    L = max(s.deviation_bound() for s in spec.summands)
    L_inf = max(s.pair_deviation_bound() for s in spec.summands)
    M3 = sum(s.pair_third_moment() for s in spec.summands)
    sigma_star2, star_prov = weak_variance(spec)

    provenance = {name: Provenance("exact")
                  for name in ("sigma2", "L", "L_inf", "M3", "sigma2_2p", "M2p")}
    provenance["sigma_star2"] = star_prov

    if mode == "exact":
        l2p, m2p, m3p3 = _joint_pair_enumeration(spec, p_list, budget)
        for p in p_list:
            provenance[f"L_2p[{p}]"] = Provenance("exact")
            provenance[f"M2p[{p}]"] = Provenance("exact")
            if spec.d == 1:
                provenance[f"M3_p3[{p}]"] = Provenance("exact")
    elif mode == "monte_carlo":
        l2p, m2p, m3p3, ses = _joint_pair_monte_carlo(spec, p_list, n_samples, stream)
        for key, s in ses.items():
            provenance[key] = Provenance("monte_carlo", se=s)
    else:
        raise ValueError("mode must be 'exact' or 'monte_carlo'")

    report = StatisticsReport(
        d=spec.d, n=spec.n, ensemble_hash=config_hash(spec.to_json()),
        sigma2=sigma2, sigma_star2=sigma_star2, L=L, L_inf=L_inf, M3=M3,
        sigma2_2p=sigma2_2p, L_2p=l2p, M2p=m2p, M3_p3=m3p3,
        provenance=provenance)
    report.validate()
    return report


def bernstein_sandwich(spec: EnsembleSpec, n_samples: int = 20_000,
                       stream: int = 0) -> dict:
    """Monte Carlo E||X - EX|| against the two-sided variance/uniform bound.

    Returns the estimate with SE plus the deterministic lower and upper
    envelope values; `within` applies a 4-SE margin on both sides.
    """
    second = np.zeros((spec.d, spec.d), dtype=complex)
    for s in spec.summands:
        second += s.second_central()
    sigma2 = schatten_norm(second, math.inf)
    L = max(s.deviation_bound() for s in spec.summands)
    draws = sample_sum(spec, stream=stream, size=n_samples) - spec.mean()
    norms = np.abs(np.linalg.eigvalsh(draws)).max(axis=-1)
    est = float(norms.mean())
    se = float(norms.std(ddof=1) / np.sqrt(len(norms)))
    log2d = math.log(2 * spec.d)
    lower = 0.5 * math.sqrt(sigma2)
    upper = math.sqrt(2 * sigma2 * log2d) + L * log2d / 3.0
    return {
        "estimate": est, "se": se, "lower": lower, "upper": upper,
        "within": lower - 4 * se <= est <= upper + 4 * se,
    }
