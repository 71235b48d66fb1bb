"""Shared numerical helpers: Hermitian projection, compensated sums, JSON codecs."""

from __future__ import annotations

import hashlib
import json
from typing import Iterable

import numpy as np

#: Entrywise tolerance used when validating self-adjointness of inputs.
HERMITIAN_ATOL = 1e-12


def sym(a: np.ndarray) -> np.ndarray:
    """Project a square matrix onto the self-adjoint subspace.

    Construction-time enforcement: the output satisfies A == A* exactly.
    """
    a = np.asarray(a, dtype=complex)
    return (a + a.conj().T) / 2.0


def is_self_adjoint(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= atol) if a.size else True


def require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError(f"{name} has non-finite entries")
    return a


def ntrace(a: np.ndarray) -> complex:
    """Normalized trace: trace divided by dimension, so ntrace(I) == 1.

    Accepts a single matrix or a batch stacked on leading axes.
    """
    a = np.asarray(a)
    return np.trace(a, axis1=-2, axis2=-1) / a.shape[-1]


def matrix_abs(a: np.ndarray) -> np.ndarray:
    """|A| = (A* A)^(1/2) via Hermitian eigendecomposition of the product.

    Single dense-symmetric code path; valid for any square matrix, exact in
    exact arithmetic for normal ones. Batched over leading axes.
    """
    a = np.asarray(a, dtype=complex)
    g = a.conj().swapaxes(-2, -1) @ a
    w, v = np.linalg.eigh(g)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[..., None, :]) @ v.conj().swapaxes(-2, -1)


def psd_power(a: np.ndarray, exponent: float) -> np.ndarray:
    """Real power of a positive-semidefinite matrix via eigendecomposition."""
    w, v = np.linalg.eigh(np.asarray(a, dtype=complex))
    w = np.clip(w, 0.0, None)
    with np.errstate(divide="ignore"):
        pw = np.where(w > 0, w**exponent, 0.0 if exponent > 0 else 0.0)
    return (v * pw[..., None, :]) @ v.conj().swapaxes(-2, -1)


def spectral_norm(a: np.ndarray) -> float:
    """Spectral norm of a self-adjoint or normal matrix (largest |eigenvalue|)."""
    a = np.asarray(a, dtype=complex)
    if is_self_adjoint(a, atol=1e-10):
        return float(np.max(np.abs(np.linalg.eigvalsh(a)))) if a.size else 0.0
    return float(np.linalg.norm(a, 2))


class CompensatedSum:
    """Kahan-compensated accumulator for scalars or arrays.

    Accumulation order is caller-controlled; with a fixed order the result is
    bit-reproducible.
    """

    def __init__(self, shape=(), dtype=complex):
        self._s = np.zeros(shape, dtype=dtype)
        self._c = np.zeros(shape, dtype=dtype)

    def add(self, value) -> None:
        y = np.asarray(value, dtype=self._s.dtype) - self._c
        t = self._s + y
        self._c = (t - self._s) - y
        self._s = t

    @property
    def value(self):
        if self._s.shape == ():
            return self._s[()]
        return self._s.copy()


def matrix_to_json(a: np.ndarray) -> dict:
    """Serialize a matrix as a flat row-major list of [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    entries = [[float(z.real), float(z.imag)] for z in a.ravel(order="C")]
    return {"d": int(a.shape[0]), "entries": entries}


def matrix_from_json(doc: dict) -> np.ndarray:
    d = int(doc["d"])
    entries = doc["entries"]
    if len(entries) != d * d:
        raise ValueError(f"matrix document claims d={d} but has {len(entries)} entries")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(d, d)


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, full-precision floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    """Content hash of a JSON-compatible document, stable under key reordering."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def relative_residual(lhs: complex, rhs: complex) -> float:
    scale = max(abs(lhs), abs(rhs), 1.0)
    return abs(lhs - rhs) / scale


def batch_means_se(values: np.ndarray, batches: int = 100) -> float:
    """Standard error of the mean of `values` estimated by batch means."""
    values = np.asarray(values, dtype=float).ravel()
    b = min(batches, len(values))
    if b < 2:
        return float("inf")
    usable = (len(values) // b) * b
    means = values[:usable].reshape(b, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(b))


def iter_weighted(pairs: Iterable) -> Iterable:
    return iter(pairs)
