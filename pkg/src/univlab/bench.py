"""Monte Carlo experiments comparing an independent sum with its Gaussian proxy.

Each experiment estimates the left side of one comparison theorem and every
bound form the theorem offers (the sharp statistic form, the Schatten-p
corollary form, and the coarse variance/uniform-bound form), then reports
whether the estimate sits below each bound with a four-standard-error
margin.  Bounds built on a statistic that is only a sampled lower bound are
flagged optimistic and excluded from pass/fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .ensembles import EnsembleSpec, sample_sum
from .gaussian_proxy import proxy_for
from .spectral_stats import StatisticsReport, ensemble_statistics
from .util import config_hash

_GAUSS_ABS_MOMENT_CACHE: dict = {}


def gaussian_abs_moment(p: float) -> float:
    """E |N(0,1)|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)."""
    if p not in _GAUSS_ABS_MOMENT_CACHE:
        _GAUSS_ABS_MOMENT_CACHE[p] = (
            2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi))
    return _GAUSS_ABS_MOMENT_CACHE[p]


@dataclass
class ExperimentConfig:
    ensemble: EnsembleSpec
    observable: dict
    samples: int = 20_000
    seed: int = 0
    n_sweep: list | None = None
    batches: int = 100

    def __post_init__(self):
        if self.samples < 100:
            raise ValueError("need at least 100 samples")
        kind = self.observable.get("kind")
        if kind is None:
            raise ValueError("observable needs a 'kind'")
        if kind in ("cauchy", "resolvent_norm"):
            if complex(self.observable["zeta"]).imag == 0:
                raise ValueError("zeta must have nonzero imaginary part")
        if kind in ("matrix_moments", "resolvent_norm"):
            p = self.observable["p"]
            if int(p) != p or p < 1:
                raise ValueError("matrix observables need integer p >= 1")
        if kind == "scalar_moments":
            p = float(self.observable["p"])
            if not (p == 2 or p >= 4):
                raise ValueError("scalar moment order must be 2 or at least 4")
        if kind == "scalar_clt" and self.observable.get("h", "sin") not in _CLT_FUNCTIONS:
            raise ValueError(f"unknown test function {self.observable.get('h')!r}")

    def to_json(self) -> dict:
        obs = dict(self.observable)
        if "zeta" in obs:
            z = complex(obs["zeta"])
            obs["zeta"] = [z.real, z.imag]
        doc = {"ensemble": self.ensemble.to_json(), "observable": obs,
               "samples": self.samples, "seed": self.seed, "batches": self.batches}
        if self.n_sweep:
            doc["n_sweep"] = list(self.n_sweep)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        obs = dict(doc["observable"])
        if isinstance(obs.get("zeta"), (list, tuple)):
            obs["zeta"] = complex(obs["zeta"][0], obs["zeta"][1])
        return cls(ensemble=EnsembleSpec.from_json(doc["ensemble"]), observable=obs,
                   samples=int(doc.get("samples", 20_000)), seed=int(doc.get("seed", 0)),
                   n_sweep=doc.get("n_sweep"), batches=int(doc.get("batches", 100)))

    def hash(self) -> str:
        return config_hash(self.to_json())


@dataclass
class Bound:
    value: float
    se: float = 0.0
    provenance: str = "exact"
    optimistic: bool = False

    def to_json(self) -> dict:
        return {"value": _num(self.value), "se": self.se,
                "provenance": self.provenance, "optimistic": self.optimistic}


def _num(x: float):
    return x if math.isfinite(x) else None


@dataclass
class BoundReport:
    name: str
    observable: dict
    lhs: float
    lhs_se: float
    bounds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def bound_passed(self, key: str) -> bool:
        b = self.bounds[key]
        if b.optimistic:
            return True
        if not math.isfinite(b.value):
            return True
        margin = 4 * math.sqrt(self.lhs_se**2 + b.se**2)
        return self.lhs <= b.value + margin

    @property
    def passed(self) -> bool:
        return all(self.bound_passed(k) for k in self.bounds)

    @property
    def slack(self) -> float:
        finite = [b.value - self.lhs for b in self.bounds.values()
                  if not b.optimistic and math.isfinite(b.value)]
        return min(finite) if finite else math.inf

    def to_json(self) -> dict:
        obs = dict(self.observable)
        if "zeta" in obs and isinstance(obs["zeta"], complex):
            obs["zeta"] = [obs["zeta"].real, obs["zeta"].imag]
        return {
            "name": self.name, "observable": obs,
            "lhs": self.lhs, "lhs_se": self.lhs_se,
            "bounds": {k: b.to_json() for k, b in sorted(self.bounds.items())},
            "pass": self.passed, "slack": _num(self.slack),
            "metadata": self.metadata, "extras": self.extras,
        }


# ---------------------------------------------------------------------------
# sampling helpers

def _eig_samples(config: ExperimentConfig):
    """Eigenvalues of paired draws of the sum and of its Gaussian proxy."""
    spec = config.ensemble
    xs = sample_sum(spec, stream=config.seed * 2 + 1, size=config.samples)
    proxy = proxy_for(spec)
    zs = proxy.sample(seed=spec.seed, stream=config.seed * 2 + 2, size=config.samples)
    return np.linalg.eigvalsh(xs), np.linalg.eigvalsh(zs)


def _batch_values(inner: np.ndarray, batches: int, transform) -> tuple[float, np.ndarray]:
    """Full-sample statistic plus its batch-means replicas."""
    full = transform(float(inner.mean()))
    usable = (len(inner) // batches) * batches
    reps = np.array([transform(float(v))
                     for v in inner[:usable].reshape(batches, -1).mean(axis=1)])
    return full, reps


def _norm_diff(lam_x: np.ndarray, lam_z: np.ndarray, order: float, batches: int,
               weight=None):
    """|  ||X||_order - ||Z||_order | with a batch-means standard error."""
    def inner(lam):
        vals = np.abs(lam) ** order if weight is None else weight(lam)
        return vals.mean(axis=-1)

    tx, reps_x = _batch_values(inner(lam_x), batches, lambda m: m ** (1.0 / order))
    tz, reps_z = _batch_values(inner(lam_z), batches, lambda m: m ** (1.0 / order))
    diff = reps_x - reps_z
    se = float(diff.std(ddof=1) / math.sqrt(len(diff)))
    return abs(tx - tz), se, tx, tz


def _statistics(config: ExperimentConfig, p_list) -> StatisticsReport:
    spec = config.ensemble
    try:
        return ensemble_statistics(spec, p_list=p_list, mode="exact")
    except Exception:
        return ensemble_statistics(spec, p_list=p_list, mode="monte_carlo",
                                   n_samples=config.samples,
                                   stream=config.seed * 2 + 11)


def _stat_bound(stats: StatisticsReport, key: str, p: int) -> tuple[float, float, str]:
    prov = stats.provenance.get(f"{key}[{p}]")
    table = {"M2p": stats.M2p, "L_2p": stats.L_2p, "M3_p3": stats.M3_p3}[key]
    if prov is None:
        return table[p], 0.0, "exact"
    return table[p], prov.se or 0.0, prov.method


# ---------------------------------------------------------------------------
# experiments

_CLT_FUNCTIONS = {
    # name -> (h, sup |D^3 h|)
    "sin": (np.sin, 1.0),
    "cos": (np.cos, 1.0),
    "linear": (lambda x: x, 0.0),
    "quadratic": (lambda x: x * x, 0.0),
}


def run_scalar_clt(config: ExperimentConfig) -> BoundReport:
    """|E h(X) - E h(Z)| against the third-moment statistic times sup|D^3 h|/6."""
    spec = config.ensemble
    if spec.d != 1:
        raise ValueError("the scalar comparison needs a d = 1 ensemble")
    t0 = time.monotonic()
    h_name = config.observable.get("h", "sin")
    h, d3_sup = _CLT_FUNCTIONS[h_name]
    lam_x, lam_z = _eig_samples(config)
    hx = h(lam_x[:, 0])
    hz = h(lam_z[:, 0])
    usable = (len(hx) // config.batches) * config.batches
    diff = (hx - hz)[:usable].reshape(config.batches, -1).mean(axis=1)
    lhs = abs(float(hx.mean() - hz.mean()))
    se = float(diff.std(ddof=1) / math.sqrt(config.batches))
    stats = _statistics(config, p_list=(2,))
    bound = Bound(d3_sup * stats.M3 / 6.0, provenance="exact")
    return BoundReport(
        name="scalar-clt", observable=config.observable, lhs=lhs, lhs_se=se,
        bounds={"third-moment": bound},
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples},
        extras={"M3": stats.M3, "d3_sup": d3_sup})


def _iid_two_point(spec: EnsembleSpec):
    """(a, b, prob_a) when every summand is the same scalar two-atom model."""
    if spec.d != 1:
        return None
    first = None
    for s in spec.summands:
        if not s.is_enumerable:
            return None
        atoms, probs = s.atoms_and_probs()
        if len(probs) != 2:
            return None
        key = (round(float(atoms[0, 0, 0].real), 15),
               round(float(atoms[1, 0, 0].real), 15),
               round(float(probs[0]), 15))
        if first is None:
            first = key
        elif key != first:
            return None
    return first


def _binomial_pmf(n: int) -> np.ndarray:
    return np.array([math.comb(n, k) for k in range(n + 1)], dtype=float) / 2.0**n


def _binomial_pmf_q(n: int, q: float) -> np.ndarray:
    ks = np.arange(n + 1)
    logs = [math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + (k * math.log(q) if q > 0 else (0.0 if k == 0 else -math.inf))
            + ((n - k) * math.log1p(-q) if q < 1 else (0.0 if k == n else -math.inf))
            for k in ks]
    return np.exp(logs)


def _exact_scalar_moments(spec: EnsembleSpec, p: float, two_point):
    """Exact ||X||_p, ||Z||_p, M_3, M_{3,p/3}, L_p for an iid two-point family.

    The sum is a binomial mixture; the proxy norm has a closed form only in
    the centered case, so callers must check the mean vanishes.
    """
    a, b, q = two_point
    n = spec.n
    mean = n * (q * a + (1 - q) * b)
    if abs(mean) > 1e-12:
        return None
    var = n * (q * a * a + (1 - q) * b * b - (q * a + (1 - q) * b) ** 2)
    pmf = _binomial_pmf_q(n, q)
    ks = np.arange(n + 1)
    xs = ks * a + (n - ks) * b
    norm_x = float(np.dot(pmf, np.abs(xs) ** p)) ** (1.0 / p)
    norm_z = math.sqrt(var) * gaussian_abs_moment(p) ** (1.0 / p)
    c = abs(a - b)
    theta = 2 * q * (1 - q)
    m3 = n * theta * c**3
    pmf_hit = _binomial_pmf_q(n, theta)
    m3p3 = (c**3) * float(np.dot(pmf_hit, ks ** (p / 3.0))) ** (3.0 / p)
    lp = c * (1 - (1 - theta) ** n) ** (1.0 / p)
    return {"norm_x": norm_x, "norm_z": norm_z, "M3": m3, "M3_p3": m3p3, "L_p": lp}


def run_scalar_moments(config: ExperimentConfig) -> BoundReport:
    """| ||X||_p - ||Z||_p | against the cube-root third-moment bounds.

    For centered iid two-point families everything is computed exactly via
    binomial sums, which is what the rate sweep relies on; otherwise Monte
    Carlo with batch-means errors.
    """
    spec = config.ensemble
    if spec.d != 1:
        raise ValueError("the scalar comparison needs a d = 1 ensemble")
    t0 = time.monotonic()
    p = float(config.observable["p"])
    two_point = _iid_two_point(spec)
    exact = _exact_scalar_moments(spec, p, two_point) if two_point else None

    if p == 2:
        # second moments agree by construction
        lhs, se = 0.0, 0.0
        norm_z = None
        provenance = "exact"
    elif exact is not None:
        lhs = abs(exact["norm_x"] - exact["norm_z"])
        se = 0.0
        norm_z = exact["norm_z"]
        provenance = "exact"
    else:
        lam_x, lam_z = _eig_samples(config)
        lhs, se, _, norm_z = _norm_diff(lam_x, lam_z, p, config.batches)
        provenance = "monte_carlo"

    if exact is not None:
        m3, m3p3, lp = exact["M3"], exact["M3_p3"], exact["L_p"]
        m3p3_se = lp_se = 0.0
        stat_prov = "exact"
    else:
        stats = _statistics(config, p_list=(max(2, int(math.ceil(p))),))
        key_p = max(2, int(math.ceil(p)))
        m3 = stats.M3
        m3p3, m3p3_se, stat_prov = _stat_bound(stats, "M3_p3", key_p)
        lp, lp_se, _ = _stat_bound(stats, "L_2p", key_p)

    cube = 0.5 * (p - 1) * (p - 2) * m3p3
    bounds = {
        "cube-form": Bound(cube ** (1.0 / 3.0),
                           se=(cube ** (-2.0 / 3.0) / 3.0 * 0.5 * (p - 1) * (p - 2)
                               * m3p3_se) if cube > 0 and m3p3_se else 0.0,
                           provenance=stat_prov),
    }
    if p >= 4:
        coro = (p * p * m3) ** (1.0 / 3.0) + p * lp
        bounds["corollary-form"] = Bound(coro, se=p * lp_se, provenance=stat_prov)

    extras = {"p": p, "M3": m3, "M3_p3": m3p3, "provenance": provenance}
    if norm_z:
        extras["norm_z"] = norm_z
        extras["relative_lhs"] = lhs / norm_z
        extras["relative_bound"] = cube / norm_z**3
    return BoundReport(
        name="scalar-moments", observable=config.observable, lhs=lhs, lhs_se=se,
        bounds=bounds,
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples},
        extras=extras)


def run_matrix_moments(config: ExperimentConfig) -> BoundReport:
    """| ||X||_2p - ||Z||_2p | against the second-moment statistic bounds."""
    t0 = time.monotonic()
    spec = config.ensemble
    p = int(config.observable["p"])
    stats = _statistics(config, p_list=(p,))
    if p == 1:
        lhs, se = 0.0, 0.0  # matched mean and variance tensor fix E ntr X^2
    else:
        lam_x, lam_z = _eig_samples(config)
        lhs, se, _, _ = _norm_diff(lam_x, lam_z, 2 * p, config.batches)

    m2p, m2p_se, m2p_prov = _stat_bound(stats, "M2p", p)
    l2p, l2p_se, l2p_prov = _stat_bound(stats, "L_2p", p)
    sharp_cube = (p - 1) * (2 * p - 1) * m2p * l2p
    sharp = Bound(sharp_cube ** (1.0 / 3.0), provenance=m2p_prov)
    if sharp_cube > 0:
        rel = math.sqrt((m2p_se / m2p) ** 2 + (l2p_se / l2p) ** 2) if m2p and l2p else 0.0
        sharp.se = sharp.value / 3.0 * rel
    s2p_sq = stats.sigma2_2p[p]  # the squared statistic, a Schatten-p norm
    coro_cube = 8 * p * p * s2p_sq * l2p
    coro = Bound(coro_cube ** (1.0 / 3.0) + 8 * p * l2p, provenance=l2p_prov)
    if coro_cube > 0:
        coro.se = (coro_cube ** (1.0 / 3.0) / 3.0 * (l2p_se / l2p) if l2p else 0.0) \
            + 8 * p * l2p_se
    bounds = {"sharp-form": sharp, "corollary-form": coro}
    if math.isfinite(stats.L):
        intro = (16 * p * p * stats.sigma2 * stats.L) ** (1.0 / 3.0) + 16 * p * stats.L
        bounds["intro-form"] = Bound(intro, provenance="exact")
        if p * stats.L**2 <= stats.sigma2:
            bounds["intro-conditional"] = Bound(32 * p * p * stats.L, provenance="exact")
    if p * l2p**2 <= s2p_sq:
        bounds["corollary-conditional"] = Bound(16 * p * p * l2p, se=16 * p * p * l2p_se,
                                                provenance=l2p_prov)
    return BoundReport(
        name="matrix-moments", observable=config.observable, lhs=lhs, lhs_se=se,
        bounds=bounds,
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples},
        extras={"p": p, "M2p": m2p, "L_2p": l2p, "sigma2_2p": s2p_sq,
                "sigma2": stats.sigma2, "L": _num(stats.L)})


def run_cauchy(config: ExperimentConfig) -> BoundReport:
    """|G_zeta(X) - G_zeta(Z)| against M_3 / |Im zeta|^4 and its coarse form."""
    t0 = time.monotonic()
    zeta = complex(config.observable["zeta"])
    lam_x, lam_z = _eig_samples(config)
    gx = np.mean(1.0 / (zeta - lam_x), axis=-1)
    gz = np.mean(1.0 / (zeta - lam_z), axis=-1)
    bound_per_sample = 1.0 / abs(zeta.imag)
    if max(np.abs(gx).max(), np.abs(gz).max()) > bound_per_sample * (1 + 1e-8):
        raise AssertionError("per-sample Cauchy transform exceeded the uniform bound")
    usable = (len(gx) // config.batches) * config.batches
    diff = (gx - gz)[:usable].reshape(config.batches, -1).mean(axis=1)
    lhs = abs(complex(gx.mean() - gz.mean()))
    se = math.sqrt((np.var(diff.real, ddof=1) + np.var(diff.imag, ddof=1))
                   / config.batches)
    stats = _statistics(config, p_list=(2,))
    denom = abs(zeta.imag) ** 4
    bounds = {"third-moment": Bound(stats.M3 / denom, provenance="exact")}
    if math.isfinite(stats.L):
        bounds["intro-form"] = Bound(4 * stats.sigma2 * stats.L / denom,
                                     provenance="exact")
    return BoundReport(
        name="cauchy", observable=config.observable, lhs=lhs, lhs_se=float(se),
        bounds=bounds,
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples},
        extras={"zeta": [zeta.real, zeta.imag], "M3": stats.M3,
                "sigma2": stats.sigma2, "L": _num(stats.L)})


def run_resolvent_norm(config: ExperimentConfig) -> BoundReport:
    """| ||R(X)||_2p - ||R(Z)||_2p | against the resolvent-power bounds.

    The uniform summand range enters all bound forms; when it is only a
    sampled lower bound the bounds are optimistic and excluded from
    pass/fail.
    """
    t0 = time.monotonic()
    spec = config.ensemble
    zeta = complex(config.observable["zeta"])
    p = int(config.observable["p"])
    lam_x, lam_z = _eig_samples(config)

    def weight(lam):
        return np.abs(zeta - lam) ** (-2.0 * p)

    lhs, se, tx, tz = _norm_diff(lam_x, lam_z, 2 * p, config.batches, weight=weight)
    cap = 1.0 / abs(zeta.imag)
    if max(tx, tz) > cap * (1 + 1e-8):
        raise AssertionError("resolvent norm exceeded the uniform bound")

    stats = _statistics(config, p_list=(p,))
    linf = stats.L_inf
    optimistic = False
    linf_prov = "exact"
    if not math.isfinite(linf):
        # unbounded models: fall back to the sampled maximum, a lower bound
        linf = 0.0
        for i, s in enumerate(spec.summands):
            g1 = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIMARY, config.seed * 2 + 21, i)
            g2 = rngmod.stream_rng(spec.seed, rngmod.PURPOSE_PRIME, config.seed * 2 + 21, i)
            delta = s.sample(g1, 2000) - s.sample(g2, 2000)
            linf = max(linf, float(np.abs(np.linalg.eigvalsh(delta)).max()))
        optimistic = True
        linf_prov = "sample_lower_bound"

    m2p, m2p_se, m2p_prov = _stat_bound(stats, "M2p", p)
    denom = abs(zeta.imag) ** 4
    cpp = (p + 1) * (2 * p + 1)
    sharp = Bound(cpp * m2p * linf / denom, se=cpp * m2p_se * linf / denom,
                  provenance=m2p_prov, optimistic=optimistic)
    s2p_sq = stats.sigma2_2p[p]
    coro = Bound(cpp * (4 * s2p_sq * linf + 4 * p * linf**3) / denom,
                 provenance=linf_prov, optimistic=optimistic)
    bounds = {"sharp-form": sharp, "corollary-form": coro}
    if math.isfinite(stats.L):
        intro = (48 * p * p * stats.sigma2 * stats.L + 72 * p**3 * stats.L**3) / denom
        bounds["intro-form"] = Bound(intro, provenance="exact")
    return BoundReport(
        name="resolvent-norm", observable=config.observable, lhs=lhs, lhs_se=se,
        bounds=bounds,
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples},
        extras={"p": p, "zeta": [zeta.real, zeta.imag], "L_inf": _num(stats.L_inf),
                "L_inf_used": linf, "norm_x": tx, "norm_z": tz})


def run_spectrum_snapshot(config: ExperimentConfig) -> BoundReport:
    """Mean Hausdorff distance between paired spectra; diagnostic only."""
    t0 = time.monotonic()
    lam_x, lam_z = _eig_samples(config)
    dists = np.empty(len(lam_x))
    for i, (lx, lz) in enumerate(zip(lam_x, lam_z)):
        gaps = np.abs(lx[:, None] - lz[None, :])
        dists[i] = max(gaps.min(axis=1).max(), gaps.min(axis=0).max())
    mean = float(dists.mean())
    se = float(dists.std(ddof=1) / math.sqrt(len(dists)))
    return BoundReport(
        name="spectrum-snapshot", observable=config.observable, lhs=mean, lhs_se=se,
        bounds={},
        metadata={"config_hash": config.hash(), "runtime_s": time.monotonic() - t0,
                  "samples": config.samples, "diagnostic_only": True},
        extras={"mean_hausdorff": mean})


_RUNNERS = {
    "scalar_clt": run_scalar_clt,
    "scalar_moments": run_scalar_moments,
    "matrix_moments": run_matrix_moments,
    "cauchy": run_cauchy,
    "resolvent_norm": run_resolvent_norm,
    "spectrum_snapshot": run_spectrum_snapshot,
}


def run_experiment(config: ExperimentConfig) -> BoundReport:
    kind = config.observable["kind"]
    if kind not in _RUNNERS:
        raise ValueError(f"unknown observable kind {kind!r}")
    return _RUNNERS[kind](config)


# ---------------------------------------------------------------------------
# sweeps

def rebuild_with_n(spec: EnsembleSpec, n: int) -> EnsembleSpec:
    """Same summand pattern, cycled to length n.

    Summand substreams are keyed by index, so sweep points reuse the draws
    of the summands they share.
    """
    summands = [spec.summands[i % spec.n] for i in range(n)]
    return EnsembleSpec(d=spec.d, summands=summands, seed=spec.seed)


def fit_loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    pairs = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pairs) < 2:
        raise ValueError("need at least two positive sweep values for a slope")
    xs = np.array([x for x, _ in pairs])
    ys = np.array([y for _, y in pairs])
    return float(np.polyfit(xs, ys, 1)[0])


def run_sweep(config: ExperimentConfig) -> dict:
    """Run the experiment across the n-sweep and fit a log-log trend.

    The fitted value is the relative comparison bound (bound over the proxy
    norm cubed) for scalar moments, where the theory predicts the square
    root decay; for other observables the primary bound itself is fitted.
    """
    if not config.n_sweep:
        raise ValueError("run_sweep needs n_sweep values")
    rows = []
    trend = []
    for n in config.n_sweep:
        sub = ExperimentConfig(
            ensemble=rebuild_with_n(config.ensemble, int(n)),
            observable=config.observable, samples=config.samples,
            seed=config.seed, batches=config.batches)
        report = run_experiment(sub)
        if report.name == "scalar-moments" and "relative_bound" in report.extras:
            metric = report.extras["relative_bound"]
        else:
            finite = [b.value for b in report.bounds.values()
                      if not b.optimistic and math.isfinite(b.value)]
            metric = min(finite) if finite else math.nan
        trend.append(metric)
        rows.append({"n": int(n), "report": report, "trend_metric": metric})
    ns = [r["n"] for r in rows]
    slope = fit_loglog_slope(ns, trend)
    return {"rows": rows, "slope": slope, "trend_values": trend, "ns": ns}
