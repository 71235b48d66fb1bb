"""First and second matrix differences of rational functions.

The difference of a rational function at a pair (triple) of matrices, in one
(two) direction(s), is read off the block upper-triangular embedding: write
the arguments on the diagonal and the directions on the superdiagonal, apply
the function to the block matrix, and extract the northeast block.  Closed
forms are provided for powers, inverse powers, resolvents, squared
resolvents, and the derivative functions of even powers and resolvent
powers; they must agree with the block path and serve as its cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .util import is_self_adjoint, ntrace, require_square

#: Below this eigenvalue-to-pole distance the block solve loses all accuracy.
POLE_ATOL = 1e-8


class PoleProximityError(ValueError):
    """An argument's spectrum is too close to a pole of the function."""


class MatrixFunction:
    """Rational function descriptor with block and closed-form evaluation paths.

    Kinds:
      power(p)                       a^p, p >= 1
      inverse_power(p)               a^-p, p >= 1
      resolvent(zeta)                (zeta - a)^-1
      resolvent_square(zeta)         (zeta - a)^-2, the derivative of the resolvent
      power_derivative(p)            2p a^(2p-1), the derivative of a^2p
      resolvent_power_derivative(zeta, p)
                                     derivative of a -> |(zeta - a)^-1|^(2p)
    """

    def __init__(self, kind: str, *, p: int | None = None, zeta: complex | None = None):
        self.kind = kind
        self.p = None if p is None else int(p)
        self.zeta = None if zeta is None else complex(zeta)
        if kind in ("power", "inverse_power", "power_derivative"):
            if self.p is None or self.p < 1:
                raise ValueError(f"{kind} needs a positive integer exponent")
        elif kind in ("resolvent", "resolvent_square"):
            if self.zeta is None or self.zeta.imag == 0:
                raise ValueError(f"{kind} needs zeta with nonzero imaginary part")
        elif kind == "resolvent_power_derivative":
            if self.zeta is None or self.zeta.imag == 0 or self.p is None or self.p < 1:
                raise ValueError("resolvent_power_derivative needs zeta off the real line and p >= 1")
        else:
            raise ValueError(f"unknown matrix function kind {kind!r}")

    @classmethod
    def power(cls, p): return cls("power", p=p)

    @classmethod
    def inverse_power(cls, p): return cls("inverse_power", p=p)

    @classmethod
    def resolvent(cls, zeta): return cls("resolvent", zeta=zeta)

    @classmethod
    def resolvent_square(cls, zeta): return cls("resolvent_square", zeta=zeta)

    @classmethod
    def power_derivative(cls, p): return cls("power_derivative", p=p)

    @classmethod
    def resolvent_power_derivative(cls, zeta, p):
        return cls("resolvent_power_derivative", zeta=zeta, p=p)

    @property
    def poles(self) -> tuple[complex, ...]:
        if self.kind == "inverse_power":
            return (0.0 + 0.0j,)
        if self.kind in ("resolvent", "resolvent_square"):
            return (self.zeta,)
        if self.kind == "resolvent_power_derivative":
            return (self.zeta, self.zeta.conjugate())
        return ()

    def __repr__(self):
        bits = [self.kind]
        if self.p is not None:
            bits.append(f"p={self.p}")
        if self.zeta is not None:
            bits.append(f"zeta={self.zeta}")
        return f"MatrixFunction({', '.join(bits)})"


def check_poles(f: MatrixFunction, *args: np.ndarray) -> None:
    poles = f.poles
    if not poles:
        return
    for a in args:
        eig = np.linalg.eigvals(a)
        for pole in poles:
            if np.min(np.abs(eig - pole)) <= POLE_ATOL:
                raise PoleProximityError(
                    f"spectrum within {POLE_ATOL} of pole {pole} for {f!r}")


def _eye_like(m: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(m.shape[-1], dtype=complex), m.shape)


def _inv(m: np.ndarray) -> np.ndarray:
    return np.linalg.solve(m, _eye_like(m).copy())


def evaluate(f: MatrixFunction, m: np.ndarray) -> np.ndarray:
    """Apply the rational function to a square matrix argument.

    Powers go by repeated multiplication and inverse kinds by dense LU
    solves: the embedded block matrices are non-normal, so routes through a
    diagonalization would be unsafe. Batches on leading axes are accepted.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"argument must be square, got shape {m.shape}")
    if f.kind == "power":
        return np.linalg.matrix_power(m, f.p)
    if f.kind == "power_derivative":
        return 2 * f.p * np.linalg.matrix_power(m, 2 * f.p - 1)
    eye = _eye_like(m)
    if f.kind == "inverse_power":
        return np.linalg.matrix_power(_inv(m), f.p)
    if f.kind == "resolvent":
        return _inv(f.zeta * eye - m)
    if f.kind == "resolvent_square":
        r = _inv(f.zeta * eye - m)
        return r @ r
    # resolvent_power_derivative: p (Rc^(p+1) R^p + R^(p+1) Rc^p)
    r = _inv(f.zeta * eye - m)
    rc = _inv(f.zeta.conjugate() * eye - m)
    p = f.p
    return p * (np.linalg.matrix_power(rc, p + 1) @ np.linalg.matrix_power(r, p)
                + np.linalg.matrix_power(r, p + 1) @ np.linalg.matrix_power(rc, p))


def _embed(diag: Sequence[np.ndarray], off: Sequence[np.ndarray]) -> np.ndarray:
    d = diag[0].shape[0]
    k = len(diag)
    m = np.zeros((k * d, k * d), dtype=complex)
    for i, a in enumerate(diag):
        m[i * d:(i + 1) * d, i * d:(i + 1) * d] = a
    for i, h in enumerate(off):
        m[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = h
    return m


def _check_dims(*mats: np.ndarray) -> int:
    mats = [require_square(m) for m in mats]
    d = mats[0].shape[0]
    if any(m.shape[0] != d for m in mats):
        raise ValueError("all arguments must share one dimension")
    return d


def matrix_difference(f: MatrixFunction, a0: np.ndarray, a1: np.ndarray,
                      h: np.ndarray) -> np.ndarray:
    """First matrix difference of f at (a0, a1) in direction h.

    Northeast block of f applied to the 2x2 block upper-triangular embedding;
    linear in h, and confluent arguments yield the directional derivative.
    """
    a0, a1, h = map(require_square, (a0, a1, h))
    d = _check_dims(a0, a1, h)
    check_poles(f, a0, a1)
    big = evaluate(f, _embed([a0, a1], [h]))
    return big[:d, d:]


def matrix_second_difference(f: MatrixFunction, a0: np.ndarray, a1: np.ndarray,
                             a2: np.ndarray, h1: np.ndarray,
                             h2: np.ndarray) -> np.ndarray:
    """Second matrix difference of f at (a0, a1, a2) in directions (h1, h2).

    Northeast (1,3) block of f on the 3x3 block-bidiagonal embedding;
    bilinear in (h1, h2).
    """
    mats = list(map(require_square, (a0, a1, a2, h1, h2)))
    d = _check_dims(*mats)
    a0, a1, a2, h1, h2 = mats
    check_poles(f, a0, a1, a2)
    big = evaluate(f, _embed([a0, a1, a2], [h1, h2]))
    return big[:d, 2 * d:]


# ---------------------------------------------------------------------------
# multi-index sets

def nonneg_sum_tuples(total: int, arity: int) -> list[tuple[int, ...]]:
    """All tuples of nonnegative integers with the given arity and sum."""
    if arity == 1:
        return [(total,)] if total >= 0 else []
    out = []
    for first in range(total + 1):
        out.extend((first,) + rest for rest in nonneg_sum_tuples(total - first, arity - 1))
    return out


def positive_sum_tuples(total: int, arity: int) -> list[tuple[int, ...]]:
    """All tuples of positive integers with the given arity and sum."""
    return [tuple(x + 1 for x in t) for t in nonneg_sum_tuples(total - arity, arity)]


def resolvent_q_tuples(p: int) -> list[tuple[int, ...]]:
    """Exponent sextuples (q1, q2, r1, r2, s1, s2) for the second difference
    of the resolvent-power derivative.

    Index 1 of each pair counts conjugate-resolvent powers, index 2 plain
    ones. There are exactly 2(p+1)(2p+1) sextuples, each summing to 2p+3.
    """
    part = []
    for q, r, s in positive_sum_tuples(p + 2, 3):
        part.append((p + 1, q, 0, r, 0, s))
    for q, r in positive_sum_tuples(p + 2, 2):
        for rp, s in positive_sum_tuples(p + 1, 2):
            part.append((q, 0, r, rp, 0, s))
    for q, r, s in positive_sum_tuples(p + 3, 3):
        part.append((q, 0, r, 0, s, p))
    mirrored = [(q2, q1, r2, r1, s2, s1) for (q1, q2, r1, r2, s1, s2) in part]
    return part + mirrored


@dataclass
class MultiIndexSet:
    """Materialized exponent tuples with their defining constraint."""

    constraint: str
    arity: int
    tuples: list = field(default_factory=list)
    total: int | None = None
    p: int | None = None

    @classmethod
    def nonneg_sum(cls, total: int, arity: int) -> "MultiIndexSet":
        return cls("nonneg_sum", arity, nonneg_sum_tuples(total, arity), total=total)

    @classmethod
    def positive_sum(cls, total: int, arity: int) -> "MultiIndexSet":
        return cls("positive_sum", arity, positive_sum_tuples(total, arity), total=total)

    @classmethod
    def resolvent_q(cls, p: int) -> "MultiIndexSet":
        return cls("resolvent_q", 6, resolvent_q_tuples(p), p=p)

    def expected_cardinality(self) -> int:
        if self.constraint == "nonneg_sum":
            return math.comb(self.total + self.arity - 1, self.arity - 1)
        if self.constraint == "positive_sum":
            return math.comb(self.total - 1, self.arity - 1) if self.total >= self.arity else 0
        return 2 * (self.p + 1) * (2 * self.p + 1)

    def __post_init__(self):
        if self.tuples and len(self.tuples) != self.expected_cardinality():
            raise ValueError("index set cardinality does not match its constraint")


# ---------------------------------------------------------------------------
# closed forms

def _powers(a: np.ndarray, top: int) -> list[np.ndarray]:
    out = [_eye_like(a)]
    for _ in range(top):
        out.append(out[-1] @ a)
    return out


def _sum_first(pa: list, pb: list, h: np.ndarray, pairs) -> np.ndarray:
    acc = None
    for q, r in pairs:
        term = pa[q] @ h @ pb[r]
        acc = term if acc is None else acc + term
    return acc if acc is not None else 0.0 * (pa[0] @ h @ pb[0])


def _sum_second(pa: list, pb: list, pc: list, g: np.ndarray, h: np.ndarray,
                triples) -> np.ndarray:
    acc = None
    for q, r, s in triples:
        term = pa[q] @ g @ pb[r] @ h @ pc[s]
        acc = term if acc is None else acc + term
    return acc if acc is not None else 0.0 * (pa[0] @ g @ pb[0] @ h @ pc[0])


def closed_form_difference(f: MatrixFunction, args: Sequence[np.ndarray],
                           directions: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate a first or second matrix difference by its explicit sum.

    Supported: power, inverse_power, resolvent, resolvent_square and
    power_derivative (both orders), resolvent_power_derivative (first and
    second order). Agrees with the block-embedding path on well-conditioned
    inputs. Arguments and directions may carry broadcastable batch axes.
    """
    args = [np.asarray(a, dtype=complex) for a in args]
    directions = [np.asarray(h, dtype=complex) for h in directions]
    if len(args) != len(directions) + 1 or len(args) not in (2, 3):
        raise ValueError("expected 2 args with 1 direction or 3 args with 2 directions")
    d = args[0].shape[-1]
    for m in (*args, *directions):
        if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] != d:
            raise ValueError("all arguments must be square matrices of one dimension")
    check_poles(f, *args)
    second = len(args) == 3
    if second:
        a, b, c = args
        g, h = directions
    else:
        a, b = args
        (h,) = directions

    if f.kind in ("power", "power_derivative"):
        p = f.p if f.kind == "power" else 2 * f.p - 1
        scale = 1.0 if f.kind == "power" else 2.0 * f.p
        if second:
            idx = nonneg_sum_tuples(p - 2, 3) if p >= 2 else []
            pa, pb, pc = _powers(a, p), _powers(b, p), _powers(c, p)
            return scale * _sum_second(pa, pb, pc, g, h, idx)
        idx = nonneg_sum_tuples(p - 1, 2) if p >= 1 else []
        return scale * _sum_first(_powers(a, p), _powers(b, p), h, idx)

    if f.kind == "inverse_power":
        p = f.p
        ia, ib = _powers(_inv(a), p + 2), _powers(_inv(b), p + 2)
        if second:
            ic = _powers(_inv(c), p + 2)
            return _sum_second(ia, ib, ic, g, h, positive_sum_tuples(p + 2, 3))
        return -_sum_first(ia, ib, h, positive_sum_tuples(p + 1, 2))

    if f.kind in ("resolvent", "resolvent_square"):
        top = 2 if f.kind == "resolvent" else 3
        ra = _powers(_inv(f.zeta * _eye_like(a) - a), top)
        rb = _powers(_inv(f.zeta * _eye_like(b) - b), top)
        if second:
            rc = _powers(_inv(f.zeta * _eye_like(c) - c), top)
            total = 3 if f.kind == "resolvent" else 4
            return _sum_second(ra, rb, rc, g, h, positive_sum_tuples(total, 3))
        total = 2 if f.kind == "resolvent" else 3
        return _sum_first(ra, rb, h, positive_sum_tuples(total, 2))

    # resolvent_power_derivative
    p = f.p
    z = f.zeta
    top = 2 * p + 3

    def respow(m):
        plain = _powers(_inv(z * _eye_like(m) - m), top)
        conj = _powers(_inv(z.conjugate() * _eye_like(m) - m), top)
        return plain, conj

    (ra, rca) = respow(a)
    (rb, rcb) = respow(b)
    if second:
        (rc_, rcc) = respow(c)
        acc = None
        for q1, q2, r1, r2, s1, s2 in resolvent_q_tuples(p):
            term = (rca[q1] @ ra[q2]) @ g @ (rcb[r1] @ rb[r2]) @ h @ (rcc[s1] @ rc_[s2])
            acc = term if acc is None else acc + term
        return p * acc
    # product rule on the two factors of f = p (Rc^(p+1) R^p + R^(p+1) Rc^p)
    acc = None
    for q, r in positive_sum_tuples(p + 1, 2):
        term = rca[p + 1] @ ra[q] @ h @ rb[r]          # Rc(a)^(p+1) * d(R^p)
        term = term + ra[p + 1] @ rca[q] @ h @ rcb[r]  # R(a)^(p+1) * d(Rc^p)
        acc = term if acc is None else acc + term
    for q, r in positive_sum_tuples(p + 2, 2):
        acc = acc + rca[q] @ h @ rcb[r] @ rb[p]        # d(Rc^(p+1)) * R(b)^p
        acc = acc + ra[q] @ h @ rb[r] @ rcb[p]         # d(R^(p+1)) * Rc(b)^p
    return p * acc


def trace_derivative_pairing(g: MatrixFunction, a: np.ndarray, h1: np.ndarray,
                             h2: np.ndarray) -> complex:
    """Pairing <D F(a), h1 (x) h2> = ntrace[h1 . Dg(a)[h2]].

    The derivative Dg(a)[h2] is the confluent matrix difference at (a, a).
    """
    deriv = matrix_difference(g, a, a, h2)
    return complex(ntrace(np.asarray(h1, dtype=complex) @ deriv))


def resolvent(a: np.ndarray, zeta: complex, *, power: int = 1,
              assert_bound: bool = True) -> np.ndarray:
    """(zeta - a)^-power for self-adjoint a, with the uniform norm guard.

    The spectral norm of the resolvent power of a self-adjoint matrix never
    exceeds |Im zeta|^-power; a violation means the input was not
    self-adjoint or the solve failed.
    """
    a = require_square(a)
    zeta = complex(zeta)
    if zeta.imag == 0:
        raise ValueError("resolvent parameter must be off the real line")
    r = _inv(zeta * np.eye(a.shape[0], dtype=complex) - a)
    out = np.linalg.matrix_power(r, power)
    if assert_bound and is_self_adjoint(a, atol=1e-10):
        bound = abs(zeta.imag) ** (-power)
        norm = np.linalg.norm(out, 2)
        if norm > bound * (1 + 1e-8):
            raise AssertionError(
                f"resolvent power norm {norm} exceeds uniform bound {bound}")
    return out
