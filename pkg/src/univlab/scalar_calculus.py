"""Scalar divided differences of order up to three.

Closed forms are used for power and resolvent functions (exact at any
confluence pattern); everything else goes through a sorted confluent
recursion that substitutes derivatives inside point clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3

#: Points closer than this (relative) are treated as coincident: naive
#: difference quotients are catastrophically ill-conditioned below it.
CONFLUENCE_RTOL = 1e-9


class ScalarFunction:
    """A scalar function together with the derivatives the calculus needs.

    Kinds: ``power`` (a^p, integer p >= 0), ``abs_power`` (|a|^p, real
    p >= 1), ``resolvent`` ((zeta - a)^{-1}, Im zeta != 0), and ``smooth``
    (arbitrary callable with explicitly supplied derivatives).
    """

    def __init__(self, kind: str, *, exponent=None, zeta=None,
                 evaluator=None, derivatives: Sequence[Callable] = ()):
        self.kind = kind
        self.exponent = exponent
        self.zeta = zeta
        self._evaluator = evaluator
        self._derivatives = tuple(derivatives)
        if kind == "power":
            if not (isinstance(exponent, (int, np.integer)) and exponent >= 0):
                raise ValueError("power exponent must be a nonnegative integer")
        elif kind == "abs_power":
            if not exponent >= 1:
                raise ValueError("abs_power exponent must be >= 1")
        elif kind == "resolvent":
            if zeta is None or complex(zeta).imag == 0:
                raise ValueError("resolvent parameter must have nonzero imaginary part")
        elif kind == "smooth":
            if evaluator is None:
                raise ValueError("smooth kind needs an evaluator")
        else:
            raise ValueError(f"unknown scalar function kind {kind!r}")

    @classmethod
    def power(cls, p: int) -> "ScalarFunction":
        return cls("power", exponent=int(p))

    @classmethod
    def abs_power(cls, p: float) -> "ScalarFunction":
        return cls("abs_power", exponent=float(p))

    @classmethod
    def resolvent(cls, zeta: complex) -> "ScalarFunction":
        return cls("resolvent", zeta=complex(zeta))

    @classmethod
    def smooth(cls, evaluator: Callable, derivatives: Sequence[Callable] = ()) -> "ScalarFunction":
        return cls("smooth", evaluator=evaluator, derivatives=derivatives)

    def value(self, a: float):
        if self.kind == "power":
            return a ** self.exponent if self.exponent > 0 else 1.0
        if self.kind == "abs_power":
            return abs(a) ** self.exponent
        if self.kind == "resolvent":
            return 1.0 / (self.zeta - a)
        return self._evaluator(a)

    def derivative(self, a: float, order: int):
        """k-th derivative at a; order 0 returns the value."""
        if order == 0:
            return self.value(a)
        if self.kind == "power":
            p = self.exponent
            if order > p:
                return 0.0
            coeff = math.perm(p, order)
            return coeff * a ** (p - order) if p > order else float(coeff)
        if self.kind == "abs_power":
            p = self.exponent
            if a == 0.0:
                if p > order:
                    return 0.0
                raise ValueError(f"|a|^{p} has no order-{order} derivative at 0")
            coeff = 1.0
            for j in range(order):
                coeff *= p - j
            sign = np.sign(a) ** order
            return coeff * sign * abs(a) ** (p - order)
        if self.kind == "resolvent":
            return math.factorial(order) * (self.zeta - a) ** (-(order + 1))
        if order > len(self._derivatives):
            raise ValueError(
                f"smooth function supplies derivatives up to order "
                f"{len(self._derivatives)}, order {order} requested")
        return self._derivatives[order - 1](a)


def _homogeneous_sum(points: Sequence[float], degree: int):
    """Complete homogeneous symmetric polynomial h_degree over the points."""
    if degree < 0:
        return 0.0
    # DP over variables: h_m(x, rest) = sum_j x^j h_{m-j}(rest).
    h = [1.0] + [0.0] * degree
    for x in points:
        acc = list(h)
        for m in range(1, degree + 1):
            acc[m] = h[m] + x * acc[m - 1]
        h = acc
    return h[degree]


def _sorted_recursion(f: ScalarFunction, pts: Sequence[float]):
    k = len(pts) - 1
    if k == 0:
        return f.value(pts[0])
    scale = max(1.0, max(abs(p) for p in pts))
    if pts[-1] - pts[0] <= CONFLUENCE_RTOL * scale:
        center = sum(pts) / len(pts)
        return f.derivative(center, k) / math.factorial(k)
    left = _sorted_recursion(f, pts[:-1])
    right = _sorted_recursion(f, pts[1:])
    return (left - right) / (pts[0] - pts[-1])


def divided_difference(f: ScalarFunction, points: Sequence[float]):
    """Order-k divided difference of f at k+1 real points (k <= 3).

    Symmetric in the points; confluent clusters are handled by closed form
    (power, resolvent) or derivative substitution, never by naive division.
    """
    pts = [float(p) for p in points]
    k = len(pts) - 1
    if k < 0:
        raise ValueError("need at least one point")
    if k > MAX_ORDER:
        raise ValueError(f"divided differences above order {MAX_ORDER} are unsupported")
    if f.kind == "power":
        return _homogeneous_sum(pts, f.exponent - k)
    if f.kind == "resolvent":
        out = 1.0 + 0.0j
        for p in pts:
            out /= (f.zeta - p)
        return out
    return _sorted_recursion(f, sorted(pts))


@dataclass
class SimplexQuadrature:
    """Quadrature rule on the order-k probability simplex.

    Nodes are barycentric tuples (length k+1, nonnegative, summing to one);
    weights are positive and total the simplex volume 1/k!.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.shape != (len(self.weights), self.order + 1):
            raise ValueError("node array must be (#nodes, order+1)")
        if np.any(self.nodes < -1e-14):
            raise ValueError("barycentric nodes must be nonnegative")
        if np.max(np.abs(self.nodes.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("barycentric nodes must sum to one")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        vol = 1.0 / math.factorial(self.order)
        if abs(self.weights.sum() - vol) > 1e-12 * max(1.0, vol):
            raise ValueError("weights must sum to the simplex volume 1/k!")


def simplex_quadrature(order: int, degree: int = 16) -> SimplexQuadrature:
    """Duffy transform of a tensor Gauss-Legendre rule (degree nodes per axis).

    Exact for polynomial integrands up to total degree ~2*degree-1-order,
    far beyond anything exercised here.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return SimplexQuadrature(0, np.array([[1.0]]), np.array([1.0]))
    x, w = np.polynomial.legendre.leggauss(degree)
    u = (x + 1.0) / 2.0
    wu = w / 2.0
    grids = np.meshgrid(*([u] * order), indexing="ij")
    wgrids = np.meshgrid(*([wu] * order), indexing="ij")
    us = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    # Duffy map: x_i = u_i * prod_{j<i} (1 - u_j); Jacobian prod_j (1-u_j)^(k-1-j).
    coords = np.empty_like(us)
    shrink = np.ones(len(us))
    jac = np.ones(len(us))
    for i in range(order):
        coords[:, i] = us[:, i] * shrink
        jac *= (1.0 - us[:, i]) ** (order - 1 - i)
        shrink = shrink * (1.0 - us[:, i])
    tau0 = 1.0 - coords.sum(axis=1)
    nodes = np.column_stack([tau0, coords])
    return SimplexQuadrature(order, nodes, weights * jac)


def genocchi_hermite(f: ScalarFunction, points: Sequence[float],
                     quad: SimplexQuadrature):
    """Integral representation of the divided difference, by quadrature.

    Computes the integral of D^k f over the simplex in barycentric
    coordinates of the points. Agrees with divided_difference exactly for
    polynomials within the rule's exactness degree.
    """
    pts = np.asarray([float(p) for p in points])
    k = len(pts) - 1
    if quad.order != k:
        raise ValueError(f"quadrature order {quad.order} does not match {k + 1} points")
    args = quad.nodes @ pts
    vals = np.array([f.derivative(a, k) for a in args])
    return complex(np.dot(quad.weights, vals)) if np.iscomplexobj(vals) else float(
        np.dot(quad.weights, vals))


def taylor_taylor_remainder(f: ScalarFunction, a: float, b: float, k: int):
    """Degree-k Taylor expansion of f(a)-f(b) around b, plus exact remainder.

    Returns (expansion, remainder) with
    expansion + remainder == f(a) - f(b); the remainder is
    (a-b)^(k+1) * divided difference of order k+1 at (a, b, ..., b).
    """
    if k < 0 or k > MAX_ORDER - 1:
        raise ValueError(f"taylor_taylor_remainder supports 0 <= k <= {MAX_ORDER - 1}")
    expansion = 0.0
    for p in range(1, k + 1):
        expansion += (a - b) ** p / math.factorial(p) * f.derivative(b, p)
    remainder = (a - b) ** (k + 1) * divided_difference(f, [a] + [b] * (k + 1))
    return expansion, remainder
