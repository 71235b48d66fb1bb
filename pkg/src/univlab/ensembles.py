"""Independent-sum ensembles of self-adjoint summands.

Provides the summand models, sampling of the sum and of exchangeable
triples (X, X', X'') sharing one replacement index, and an exact-enumeration
expectation oracle for finite-support instances.  All sampling is addressed
by explicit stream ids through counter-based generators, so draws are
deterministic and parallelizable without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import rng as rngmod
from .util import CompensatedSum, matrix_from_json, matrix_to_json, ntrace, sym

_COEFF_VARIANCE = {"rademacher": 1.0, "gaussian": 1.0, "uniform": 1.0 / 3.0}
# E|xi - xi'|^3 for two independent copies of the coefficient variable.
_COEFF_ABS3_PAIR = {
    "rademacher": 4.0,
    "gaussian": 8.0 / math.sqrt(math.pi),
    "uniform": 0.8,
}
# ess-sup |xi - xi'|; infinite for the Gaussian coefficient.
_COEFF_PAIR_RANGE = {"rademacher": 2.0, "gaussian": math.inf, "uniform": 2.0}
_COEFF_DEV_RANGE = {"rademacher": 1.0, "gaussian": math.inf, "uniform": 1.0}


class BudgetExceededError(RuntimeError):
    """The exact oracle's joint state space exceeds the configured budget."""


@dataclass
class ExactOracleBudget:
    max_states: int = 2_000_000

    def __post_init__(self):
        if self.max_states <= 0:
            raise ValueError("budget must be positive")


class Summand:
    """One independent self-adjoint summand S_i.

    Kinds: ``finite_support`` (explicit atom list), ``rademacher_coefficient``
    (S = eps A with eps = +-1), ``gaussian_coefficient`` (S = gamma A with
    standard normal gamma), and ``sparse_entry`` (S = xi * scale *
    (E_jk + E_kj)/sqrt(2), a minimal non-commuting test family).
    """

    def __init__(self, kind: str, d: int, *, atoms=None, probs=None,
                 coefficient_matrix=None, position=None, scale=1.0,
                 distribution="rademacher"):
        self.kind = kind
        self.d = int(d)
        if kind == "finite_support":
            self._atoms = np.stack([sym(a) for a in atoms])
            self._probs = np.asarray(probs, dtype=float)
            if np.any(self._probs <= 0) or abs(self._probs.sum() - 1.0) > 1e-12:
                raise ValueError("finite-support probabilities must be positive and sum to one")
            if self._atoms.shape[1:] != (self.d, self.d):
                raise ValueError("atom dimension mismatch")
        elif kind in ("rademacher_coefficient", "gaussian_coefficient"):
            self._coeff = sym(coefficient_matrix)
            if self._coeff.shape != (self.d, self.d):
                raise ValueError("coefficient dimension mismatch")
        elif kind == "sparse_entry":
            j, k = position
            if not (0 <= j < self.d and 0 <= k < self.d):
                raise ValueError("sparse position out of range")
            if distribution not in ("rademacher", "uniform"):
                raise ValueError("sparse_entry distribution must be rademacher or uniform")
            base = np.zeros((self.d, self.d), dtype=complex)
            base[j, k] += 1.0
            base[k, j] += 1.0
            self._coeff = base * (float(scale) / math.sqrt(2.0))
            self.position = (int(j), int(k))
            self.scale = float(scale)
            self.distribution = distribution
        else:
            raise ValueError(f"unknown summand kind {kind!r}")

    # -- constructors ------------------------------------------------------
    @classmethod
    def finite_support(cls, atoms, probs) -> "Summand":
        atoms = [np.atleast_2d(np.asarray(a, dtype=complex)) for a in atoms]
        return cls("finite_support", atoms[0].shape[0], atoms=atoms, probs=probs)

    @classmethod
    def rademacher(cls, a) -> "Summand":
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        return cls("rademacher_coefficient", a.shape[0], coefficient_matrix=a)

    @classmethod
    def gaussian(cls, a) -> "Summand":
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        return cls("gaussian_coefficient", a.shape[0], coefficient_matrix=a)

    @classmethod
    def sparse_entry(cls, d, position, scale=1.0, distribution="rademacher") -> "Summand":
        return cls("sparse_entry", d, position=position, scale=scale,
                   distribution=distribution)

    # -- exact structure ---------------------------------------------------
    @property
    def coefficient_distribution(self) -> str | None:
        if self.kind == "rademacher_coefficient":
            return "rademacher"
        if self.kind == "gaussian_coefficient":
            return "gaussian"
        if self.kind == "sparse_entry":
            return self.distribution
        return None

    @property
    def is_enumerable(self) -> bool:
        return self.kind == "finite_support" or self.coefficient_distribution == "rademacher"

    def atoms_and_probs(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "finite_support":
            return self._atoms, self._probs
        if self.coefficient_distribution == "rademacher":
            return np.stack([self._coeff, -self._coeff]), np.array([0.5, 0.5])
        raise BudgetExceededError(f"summand kind {self.kind} has no finite support")

    def mean(self) -> np.ndarray:
        if self.kind == "finite_support":
            return np.tensordot(self._probs, self._atoms, axes=1)
        return np.zeros((self.d, self.d), dtype=complex)

    def second_central(self) -> np.ndarray:
        """E[(S - ES)^2], exact for every kind."""
        if self.kind == "finite_support":
            mu = self.mean()
            dev = self._atoms - mu
            return np.einsum("a,aij,ajk->ik", self._probs, dev, dev)
        return _COEFF_VARIANCE[self.coefficient_distribution] * (self._coeff @ self._coeff)

    def deviation_bound(self) -> float:
        """ess-sup of the spectral norm of S - ES."""
        if self.kind == "finite_support":
            mu = self.mean()
            return max(float(np.linalg.norm(a - mu, 2)) for a in self._atoms)
        rad = _COEFF_DEV_RANGE[self.coefficient_distribution]
        return rad * float(np.linalg.norm(self._coeff, 2))

    def pair_deviation_bound(self) -> float:
        """ess-sup of the spectral norm of S - S' over independent copies."""
        if self.kind == "finite_support":
            return max(float(np.linalg.norm(a - b, 2))
                       for a in self._atoms for b in self._atoms)
        rad = _COEFF_PAIR_RANGE[self.coefficient_distribution]
        return rad * float(np.linalg.norm(self._coeff, 2))

    def pair_third_moment(self) -> float:
        """E ntrace |S - S'|^3 over independent copies, exact."""
        if self.kind == "finite_support":
            total = 0.0
            for pa, a in zip(self._probs, self._atoms):
                for pb, b in zip(self._probs, self._atoms):
                    lam = np.linalg.eigvalsh(a - b)
                    total += pa * pb * float(np.mean(np.abs(lam) ** 3))
            return total
        lam = np.linalg.eigvalsh(self._coeff)
        return _COEFF_ABS3_PAIR[self.coefficient_distribution] * float(np.mean(np.abs(lam) ** 3))

    def variance_terms(self) -> list[tuple[float, np.ndarray]]:
        """Pairs (w_t, B_t) with Var[u* S u] = sum_t w_t (u* B_t u)^2."""
        if self.kind == "finite_support":
            mu = self.mean()
            return [(float(p), a - mu) for p, a in zip(self._probs, self._atoms)]
        return [(_COEFF_VARIANCE[self.coefficient_distribution], self._coeff)]

    def vec_covariance(self, vec: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Exact covariance of vec(S) in caller-supplied real coordinates."""
        if self.kind == "finite_support":
            mu = self.mean()
            vecs = np.stack([vec(a - mu) for a in self._atoms])
            return np.einsum("a,ai,aj->ij", self._probs, vecs, vecs)
        v = vec(self._coeff)
        return _COEFF_VARIANCE[self.coefficient_distribution] * np.outer(v, v)

    # -- sampling ----------------------------------------------------------
    def sample(self, gen: np.random.Generator, size: int | None = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        if self.kind == "finite_support":
            idx = gen.choice(len(self._probs), size=n, p=self._probs)
            out = self._atoms[idx]
        else:
            dist = self.coefficient_distribution
            if dist == "rademacher":
                xi = gen.integers(0, 2, size=n) * 2.0 - 1.0
            elif dist == "gaussian":
                xi = gen.standard_normal(n)
            else:
                xi = gen.uniform(-1.0, 1.0, size=n)
            out = xi[:, None, None] * self._coeff
        return out[0] if size is None else out

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "finite_support":
            return {"kind": "finite_support",
                    "atoms": [{"matrix": matrix_to_json(a), "prob": float(p)}
                              for a, p in zip(self._atoms, self._probs)]}
        if self.kind in ("rademacher_coefficient", "gaussian_coefficient"):
            return {"kind": self.kind, "matrix": matrix_to_json(self._coeff)}
        return {"kind": "sparse_entry", "d": self.d, "position": list(self.position),
                "scale": self.scale, "distribution": self.distribution}

    @classmethod
    def from_json(cls, doc: dict) -> "Summand":
        kind = doc["kind"]
        if kind == "finite_support":
            atoms = [matrix_from_json(a["matrix"]) for a in doc["atoms"]]
            probs = [a["prob"] for a in doc["atoms"]]
            return cls.finite_support(atoms, probs)
        if kind == "rademacher_coefficient":
            return cls.rademacher(matrix_from_json(doc["matrix"]))
        if kind == "gaussian_coefficient":
            return cls.gaussian(matrix_from_json(doc["matrix"]))
        if kind == "sparse_entry":
            return cls.sparse_entry(doc["d"], tuple(doc["position"]),
                                    doc.get("scale", 1.0),
                                    doc.get("distribution", "rademacher"))
        raise ValueError(f"unknown summand kind {kind!r}")


@dataclass
class EnsembleSpec:
    d: int
    summands: list
    seed: int = 0

    def __post_init__(self):
        if not self.summands:
            raise ValueError("need at least one summand")
        if any(s.d != self.d for s in self.summands):
            raise ValueError("summands must share the ensemble dimension")

    @property
    def n(self) -> int:
        return len(self.summands)

    def mean(self) -> np.ndarray:
        out = np.zeros((self.d, self.d), dtype=complex)
        for s in self.summands:
            out += s.mean()
        return out

    @property
    def is_enumerable(self) -> bool:
        return all(s.is_enumerable for s in self.summands)

    def to_json(self) -> dict:
        return {"d": self.d, "n": self.n, "seed": int(self.seed),
                "summands": [s.to_json() for s in self.summands]}

    @classmethod
    def from_json(cls, doc: dict) -> "EnsembleSpec":
        summands = [Summand.from_json(s) for s in doc["summands"]]
        if "n" in doc and doc["n"] != len(summands):
            raise ValueError("summand count does not match declared n")
        return cls(d=int(doc["d"]), summands=summands, seed=int(doc.get("seed", 0)))


@dataclass
class ExchangeableTriple:
    """One joint draw (X, X', X'') with the shared replacement index.

    Both counterparts replace the same uniformly chosen summand with a fresh
    copy; `draws` keeps the three underlying summand sequences.
    """

    x: np.ndarray
    xp: np.ndarray
    xpp: np.ndarray
    index: int
    draws: tuple  # (s, sp, spp), each of shape (n, d, d)

    def reconstruction_error(self) -> float:
        s, sp, spp = self.draws
        x = s.sum(axis=0)
        err = max(
            float(np.max(np.abs(self.x - x))),
            float(np.max(np.abs(self.xp - (x + sp[self.index] - s[self.index])))),
            float(np.max(np.abs(self.xpp - (x + spp[self.index] - s[self.index])))),
        )
        return err


def _summand_rng(spec: EnsembleSpec, purpose: int, stream: int, i: int) -> np.random.Generator:
    return rngmod.stream_rng(spec.seed, purpose, stream, i)


def sample_sum(spec: EnsembleSpec, stream: int = 0, size: int | None = None) -> np.ndarray:
    """Draw X = sum S_i; deterministic given (spec.seed, stream).

    Summand i always consumes its own substream, so enlarging an ensemble
    reuses the draws of the summands it shares with a smaller one.
    """
    n_draws = 1 if size is None else int(size)
    out = np.zeros((n_draws, spec.d, spec.d), dtype=complex)
    for i, summand in enumerate(spec.summands):
        gen = _summand_rng(spec, rngmod.PURPOSE_PRIMARY, stream, i)
        out += summand.sample(gen, n_draws)
    return out[0] if size is None else out


def sample_triple(spec: EnsembleSpec, stream: int = 0) -> ExchangeableTriple:
    """Joint draw of the exchangeable triple with one shared index."""
    s = np.stack([sm.sample(_summand_rng(spec, rngmod.PURPOSE_PRIMARY, stream, i))
                  for i, sm in enumerate(spec.summands)])
    sp = np.stack([sm.sample(_summand_rng(spec, rngmod.PURPOSE_PRIME, stream, i))
                   for i, sm in enumerate(spec.summands)])
    spp = np.stack([sm.sample(_summand_rng(spec, rngmod.PURPOSE_DOUBLE_PRIME, stream, i))
                    for i, sm in enumerate(spec.summands)])
    idx_gen = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_INDEX, stream)
    i = int(idx_gen.integers(0, spec.n))
    x = s.sum(axis=0)
    return ExchangeableTriple(
        x=x, xp=x + sp[i] - s[i], xpp=x + spp[i] - s[i], index=i, draws=(s, sp, spp))


def sample_triples(spec: EnsembleSpec, stream: int, size: int):
    """Vectorized triples: returns (x, xp, xpp, index) without full draws."""
    size = int(size)
    x = np.zeros((size, spec.d, spec.d), dtype=complex)
    idx_gen = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_INDEX, stream)
    index = idx_gen.integers(0, spec.n, size=size)
    rep = np.zeros_like(x)
    repp = np.zeros_like(x)
    for i, summand in enumerate(spec.summands):
        s_i = summand.sample(_summand_rng(spec, rngmod.PURPOSE_PRIMARY, stream, i), size)
        sp_i = summand.sample(_summand_rng(spec, rngmod.PURPOSE_PRIME, stream, i), size)
        spp_i = summand.sample(_summand_rng(spec, rngmod.PURPOSE_DOUBLE_PRIME, stream, i), size)
        x += s_i
        hit = index == i
        rep[hit] = (sp_i - s_i)[hit]
        repp[hit] = (spp_i - s_i)[hit]
    return x, x + rep, x + repp, index


def _atom_tables(spec: EnsembleSpec):
    atoms, probs = [], []
    for sm in spec.summands:
        a, p = sm.atoms_and_probs()
        atoms.append(a)
        probs.append(p)
    return atoms, probs


def exact_expectation(spec: EnsembleSpec, functional: Callable,
                      budget: ExactOracleBudget | None = None,
                      uses: Sequence[str] = ("s", "sp", "spp", "i")):
    """Exact expectation of a functional of (S, S', S'', I) by enumeration.

    The functional receives the three summand sequences as (n, d, d) arrays
    and the replacement index; copies absent from `uses` are passed as None
    and skipped in the enumeration. Outcomes are visited in lexicographic
    (summand, atom) order with compensated accumulation, so the result is
    bit-reproducible.
    """
    budget = budget or ExactOracleBudget()
    uses = tuple(uses)
    atoms, probs = _atom_tables(spec)
    sizes = [len(p) for p in probs]
    k_total = math.prod(sizes)
    n_copies = sum(1 for u in ("s", "sp", "spp") if u in uses)
    states = k_total**n_copies * (spec.n if "i" in uses else 1)
    if states > budget.max_states:
        raise BudgetExceededError(
            f"exact oracle needs {states} states, budget is {budget.max_states}")

    def outcomes():
        for combo in product(*(range(k) for k in sizes)):
            seq = np.stack([atoms[i][c] for i, c in enumerate(combo)])
            weight = math.prod(probs[i][c] for i, c in enumerate(combo))
            yield seq, weight

    acc: CompensatedSum | None = None

    def accumulate(value, weight):
        nonlocal acc
        value = np.asarray(value, dtype=complex) * weight
        if acc is None:
            acc = CompensatedSum(shape=value.shape)
        acc.add(value)

    s_iter = list(outcomes()) if "s" in uses else [(None, 1.0)]
    sp_iter = list(outcomes()) if "sp" in uses else [(None, 1.0)]
    spp_iter = list(outcomes()) if "spp" in uses else [(None, 1.0)]
    indices = range(spec.n) if "i" in uses else [None]
    idx_weight = 1.0 / spec.n if "i" in uses else 1.0

    for s, ws in s_iter:
        for sp, wsp in sp_iter:
            for spp, wspp in spp_iter:
                base = ws * wsp * wspp
                for i in indices:
                    accumulate(functional(s, sp, spp, i), base * idx_weight)
    return acc.value


def triple_from_draws(s: np.ndarray, sp: np.ndarray, spp: np.ndarray, i: int):
    """(X, X', X'') reconstructed from summand sequences and the index."""
    x = s.sum(axis=0)
    return x, x + sp[i] - s[i], x + spp[i] - s[i]


def linear_regression_check(spec: EnsembleSpec, mode: str = "exact",
                            budget: ExactOracleBudget | None = None,
                            stream: int = 0, n_outer: int = 200,
                            n_inner: int = 2000) -> float:
    """Max-norm residual of E[X - X' | X] - (X - EX)/n.

    Exact mode enumerates the replacement (S', I) for every support point of
    the sum; Monte Carlo mode averages fresh replacements per sampled X.
    """
    ex = spec.mean()
    n = spec.n
    if mode == "exact":
        budget = budget or ExactOracleBudget()
        atoms, probs = _atom_tables(spec)
        sizes = [len(p) for p in probs]
        if math.prod(sizes) * sum(sizes) > budget.max_states:
            raise BudgetExceededError("linear regression enumeration exceeds budget")
        worst = 0.0
        for combo in product(*(range(k) for k in sizes)):
            seq = np.stack([atoms[i][c] for i, c in enumerate(combo)])
            x = seq.sum(axis=0)
            cond = CompensatedSum(shape=(spec.d, spec.d))
            for i in range(n):
                for p_a, a in zip(probs[i], atoms[i]):
                    cond.add((p_a / n) * (seq[i] - a))
            resid = cond.value - (x - ex) / n
            worst = max(worst, float(np.max(np.abs(resid))))
        return worst
    if mode != "monte_carlo":
        raise ValueError("mode must be 'exact' or 'monte_carlo'")
    worst = 0.0
    for outer in range(n_outer):
        s = np.stack([sm.sample(_summand_rng(spec, rngmod.PURPOSE_PRIMARY, stream, i))
                      for i, sm in enumerate(spec.summands)])
        x = s.sum(axis=0)
        gen = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIME, stream, outer)
        idx = gen.integers(0, n, size=n_inner)
        est = CompensatedSum(shape=(spec.d, spec.d))
        for i in range(n):
            hits = int(np.sum(idx == i))
            if hits == 0:
                continue
            fresh = spec.summands[i].sample(gen, hits)
            est.add((s[i] * hits - fresh.sum(axis=0)) / n_inner)
        resid = est.value - (x - ex) / n
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


# ---------------------------------------------------------------------------
# stock ensembles

def rademacher_scalar(n: int, seed: int = 0) -> EnsembleSpec:
    """n scalar +-1 coefficients: the standardized bounded test family."""
    one = np.array([[1.0]])
    return EnsembleSpec(d=1, summands=[Summand.rademacher(one) for _ in range(n)], seed=seed)


def two_point_scalar(n: int, a: float, b: float, prob_a: float, seed: int = 0) -> EnsembleSpec:
    atoms = [np.array([[a]]), np.array([[b]])]
    probs = [prob_a, 1.0 - prob_a]
    return EnsembleSpec(
        d=1, summands=[Summand.finite_support(atoms, probs) for _ in range(n)], seed=seed)


def wigner_sparse(d: int, n: int, scale: float = 1.0,
                  distribution: str = "rademacher", seed: int = 0) -> EnsembleSpec:
    """Wigner-like sparse family: each summand carries one symmetric entry pair."""
    positions = [(j, k) for j in range(d) for k in range(j, d)]
    summands = [Summand.sparse_entry(d, positions[i % len(positions)], scale, distribution)
                for i in range(n)]
    return EnsembleSpec(d=d, summands=summands, seed=seed)


def gaussian_coefficient_ensemble(mats: Sequence[np.ndarray], seed: int = 0) -> EnsembleSpec:
    mats = [np.atleast_2d(np.asarray(m)) for m in mats]
    return EnsembleSpec(d=mats[0].shape[0],
                        summands=[Summand.gaussian(m) for m in mats], seed=seed)
