"""Gaussian proxy construction: variance tensors, factorization, interpolants.

A self-adjoint Gaussian matrix is determined by its mean and the second
moment of its fluctuation.  We carry that second moment in two forms: a real
covariance over fixed coordinates of the self-adjoint space (used for
factorization and sampling) and the Kronecker form E[(X-EX) (x) (X-EX)]
(used in the integration-by-parts pairings).

Coordinate convention for vec/unvec on d x d self-adjoint matrices, in this
order: the d diagonal entries, then sqrt(2) * Re of the strict upper
triangle row-major, then sqrt(2) * Im of the strict upper triangle
row-major.  The sqrt(2) scaling makes vec an isometry for the Frobenius
inner product, so eigen-factorization of the covariance transfers directly
to matrix factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .ensembles import EnsembleSpec, sample_sum
from .util import matrix_to_json, sym

_SQRT2 = np.sqrt(2.0)


def real_dim(d: int) -> int:
    return d * d


def vec(a: np.ndarray) -> np.ndarray:
    """Isometric real coordinates of a self-adjoint matrix."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    upper = [a[j, k] for j in range(d) for k in range(j + 1, d)]
    return np.concatenate([
        np.real(np.diag(a)),
        _SQRT2 * np.real(upper) if upper else np.zeros(0),
        _SQRT2 * np.imag(upper) if upper else np.zeros(0),
    ])


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros((d, d), dtype=complex)
    out[np.diag_indices(d)] = v[:d]
    m = d * (d - 1) // 2
    re = v[d:d + m] / _SQRT2
    im = v[d + m:d + 2 * m] / _SQRT2
    pos = 0
    for j in range(d):
        for k in range(j + 1, d):
            out[j, k] = re[pos] + 1j * im[pos]
            out[k, j] = re[pos] - 1j * im[pos]
            pos += 1
    return out


@dataclass
class VarianceTensor:
    """Second moment of the fluctuation in real coordinates, with the
    Kronecker form available on demand."""

    d: int
    real_covariance: np.ndarray
    se: float = 0.0  # entrywise standard error when Monte Carlo estimated
    method: str = "exact"

    def __post_init__(self):
        c = np.asarray(self.real_covariance, dtype=float)
        if c.shape != (real_dim(self.d),) * 2:
            raise ValueError("covariance must be d^2 x d^2 over real coordinates")
        if np.max(np.abs(c - c.T)) > 1e-10 * max(1.0, np.max(np.abs(c))):
            raise ValueError("covariance must be symmetric")
        self.real_covariance = (c + c.T) / 2

    def kron_form(self) -> np.ndarray:
        """E[(X-EX) (x) (X-EX)] reconstructed from the real coordinates."""
        d = self.d
        basis = [unvec(e, d) for e in np.eye(real_dim(d))]
        out = np.zeros((d * d, d * d), dtype=complex)
        for a in range(real_dim(d)):
            ba = basis[a]
            for b in range(real_dim(d)):
                c = self.real_covariance[a, b]
                if c != 0.0:
                    out += c * np.kron(ba, basis[b])
        return out


@dataclass
class GaussianProxy:
    """Mean plus factor list: Z = mean + sum_k gamma_k factors[k]."""

    mean: np.ndarray
    factors: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def sample(self, seed: int, stream: int = 0, size: int | None = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        gen = rngmod.stream_rng(seed, rngmod.PURPOSE_GAUSSIAN, stream)
        out = np.broadcast_to(self.mean, (n, self.d, self.d)).astype(complex)
        if self.factors:
            gammas = gen.standard_normal((n, self.n_factors))
            out = out + np.einsum("nk,kij->nij", gammas, np.stack(self.factors))
        return out[0] if size is None else out.copy()

    def variance_tensor(self) -> VarianceTensor:
        c = np.zeros((real_dim(self.d),) * 2)
        for a in self.factors:
            v = vec(a)
            c += np.outer(v, v)
        return VarianceTensor(self.d, c)

    def kron_form(self) -> np.ndarray:
        out = np.zeros((self.d**2, self.d**2), dtype=complex)
        for a in self.factors:
            out += np.kron(a, a)
        return out

    def factors_to_json(self) -> list:
        return [matrix_to_json(a) for a in self.factors]


def variance_tensor(spec: EnsembleSpec, mode: str = "exact",
                    n_samples: int = 20_000, stream: int = 0) -> VarianceTensor:
    """Variance tensor of the sum; additive over independent summands.

    Exact for finite-support and coefficient summands; otherwise a Monte
    Carlo estimate with its entrywise standard error.
    """
    d = spec.d
    if mode == "exact":
        cov = np.zeros((real_dim(d),) * 2)
        for s in spec.summands:
            cov += s.vec_covariance(vec)
        return VarianceTensor(d, cov, method="exact")
    if mode != "monte_carlo":
        raise ValueError("mode must be 'exact' or 'monte_carlo'")
    draws = sample_sum(spec, stream=stream, size=n_samples)
    coords = np.stack([vec(x) for x in draws - spec.mean()])
    cov = coords.T @ coords / len(coords)
    prods = np.einsum("ni,nj->nij", coords, coords)
    se = float(np.max(prods.std(axis=0) / np.sqrt(len(coords))))
    return VarianceTensor(d, cov, se=se, method="monte_carlo")


def build_proxy(mean: np.ndarray, v: VarianceTensor,
                *, negative_tol: float = 1e-10,
                drop_rel: float = 1e-12) -> GaussianProxy:
    """Factor the variance tensor into self-adjoint matrices.

    Symmetric eigendecomposition of the real covariance; eigenvalues below
    -negative_tol (relative to the largest) signal an inconsistent input,
    small ones are clipped, and factors below drop_rel * max are dropped.
    """
    mean = sym(np.asarray(mean))
    w, vects = np.linalg.eigh(v.real_covariance)
    top = float(w[-1]) if len(w) else 0.0
    if top <= 0.0:
        if np.min(w, initial=0.0) < -negative_tol:
            raise ValueError("variance tensor is not positive semidefinite")
        return GaussianProxy(mean=mean, factors=[])
    if np.min(w) < -negative_tol * max(1.0, top):
        raise ValueError("variance tensor is not positive semidefinite")
    factors = []
    for lam, col in zip(w, vects.T):
        if lam <= drop_rel * top:
            continue
        factors.append(sym(np.sqrt(lam) * unvec(col, v.d)))
    return GaussianProxy(mean=mean, factors=factors)


def proxy_for(spec: EnsembleSpec, mode: str = "exact") -> GaussianProxy:
    return build_proxy(spec.mean(), variance_tensor(spec, mode=mode))


def sample_interpolant(t: float, x: np.ndarray, z: np.ndarray,
                       ex: np.ndarray) -> np.ndarray:
    """Y_t = EX + sqrt(t) (X - EX) + sqrt(1-t) (Z - EX).

    Endpoints are exact: Y_1 = X, Y_0 = Z. Mean and variance tensor are
    constant in t. Accepts batches on the leading axes of x and z.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("interpolation time must lie in [0, 1]")
    if t == 1.0:
        return np.array(x, copy=True)
    if t == 0.0:
        return np.array(z, copy=True)
    return ex + np.sqrt(t) * (x - ex) + np.sqrt(1.0 - t) * (z - ex)


def gauss_hermite_nodes(n_factors: int, nodes_per_axis: int = 24,
                        max_factors: int = 3):
    """Tensor Gauss-Hermite grid for expectations over i.i.d. standard normals.

    Returns (points, weights) with points of shape (m, n_factors) and weights
    summing to one. Grids are capped at max_factors coordinates; larger
    proxies should fall back to Monte Carlo.
    """
    if n_factors > max_factors:
        raise ValueError(
            f"Gauss-Hermite grid capped at {max_factors} coordinates, got {n_factors}")
    if n_factors == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = np.polynomial.hermite_e.hermegauss(nodes_per_axis)
    w = w / np.sqrt(2 * np.pi)
    grids = np.meshgrid(*([x] * n_factors), indexing="ij")
    wgrids = np.meshgrid(*([w] * n_factors), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def proxy_nodes(proxy: GaussianProxy, nodes_per_axis: int = 24):
    """Quadrature realizations of Z with matching weights."""
    pts, wts = gauss_hermite_nodes(proxy.n_factors, nodes_per_axis)
    if proxy.n_factors == 0:
        return proxy.mean[None, :, :], wts
    zs = proxy.mean + np.einsum("mk,kij->mij", pts, np.stack(proxy.factors))
    return zs, wts
