"""p-Rvachev smooth union of obstacle implicit functions.

Two implicit values combine as ``b_i + b_k - (|b_i|^p + |b_k|^p)^(1/p)``
with ``p > 1``.  The zero set is the union boundary of the members; the
value is negative inside the union and positive outside.  Absolute values
inside the power terms extend the classical near-boundary formula to the
obstacle interiors without breaking the sign convention (the naive signed
power ``sign(b)|b|^p`` can report points deep inside one member as free
whenever the other member's magnitude is smaller).

More than two members fold left-to-right in list order; the Rvachev union
is not associative, so the member order is semantically significant and is
preserved from the scene file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Obstacle, as_vec3


class MergeError(ValueError):
    """Invalid merge parameters."""


DEFAULT_P = 2.0


@dataclass(frozen=True)
class MergedObstacle:
    """Composite obstacle: ordered members folded with the p-Rvachev union."""

    members: tuple
    p_exponent: float = DEFAULT_P

    def __post_init__(self):
        if len(self.members) < 2:
            raise MergeError("a merged obstacle needs at least 2 members")
        if not (self.p_exponent > 1.0):
            raise MergeError(f"p exponent must exceed 1, got {self.p_exponent}")
        for m in self.members:
            if not isinstance(m, Obstacle):
                raise MergeError("merged members must be primitive obstacles")

    def to_dict(self) -> dict:
        return {"type": "merged", "p": self.p_exponent,
                "members": [m.to_dict() for m in self.members]}


def rvachev_union(b_i: float, b_k: float, p: float) -> float:
    """Union value of two implicit-function values."""
    if not (p > 1.0):
        raise MergeError(f"p exponent must exceed 1, got {p}")
    return float(_kernels.rvachev_value(float(b_i), float(b_k), float(p)))


def rvachev_grad(b_i: float, grad_i, b_k: float, grad_k, p: float) -> np.ndarray:
    """Gradient of the union; exact limiting value on member boundaries.

    On the boundary this reduces to ``grad_i`` (when ``b_i = 0 != b_k``),
    ``grad_k`` symmetrically, and ``grad_i + grad_k`` on the intersection
    curve where both vanish.
    """
    if not (p > 1.0):
        raise MergeError(f"p exponent must exceed 1, got {p}")
    g = np.empty(3)
    _kernels.rvachev_pair_grad(float(b_i), as_vec3(grad_i, "grad_i"),
                               float(b_k), as_vec3(grad_k, "grad_k"),
                               float(p), g)
    return g


def _pack_members(m: MergedObstacle):
    kinds = np.array([o.kind for o in m.members], dtype=np.int64)
    params = np.stack([o.pack() for o in m.members])
    return kinds, params


def merged_beta(m: MergedObstacle, x) -> float:
    """Composite implicit value at ``x`` (left fold in member order)."""
    kinds, params = _pack_members(m)
    return float(_kernels.term_beta(kinds, params, 0, len(m.members),
                                    m.p_exponent, as_vec3(x)))


def merged_grad(m: MergedObstacle, x) -> np.ndarray:
    """Analytic gradient of the composite implicit function."""
    kinds, params = _pack_members(m)
    g = np.empty(3)
    _kernels.term_beta_grad(kinds, params, 0, len(m.members),
                            m.p_exponent, as_vec3(x), g)
    return g


def pair_value_grad_hess(b1, g1, h1, b2, g2, h2, p):
    """Fold step carrying value, gradient and Hessian through one union."""
    a1 = abs(b1)
    a2 = abs(b2)
    bsum = a1 ** p + a2 ** p
    if bsum == 0.0:
        # corner of the union: Hessian of the coupling term is singular;
        # return the limiting sum (only reachable on the intersection curve)
        return 0.0, g1 + g2, h1 + h2
    c = bsum ** (1.0 / p - 1.0)
    w1 = c * a1 ** (p - 1.0) * (1.0 if b1 >= 0 else -1.0)
    w2 = c * a2 ** (p - 1.0) * (1.0 if b2 >= 0 else -1.0)
    val = b1 + b2 - bsum ** (1.0 / p)
    grad = (1.0 - w1) * g1 + (1.0 - w2) * g2

    # second derivatives of M = (|b1|^p + |b2|^p)^(1/p) w.r.t. (b1, b2);
    # |b|^(p-2) diverges on a member surface when p < 2 (R_p is not C^2 there)
    def pow_nn(base, expo):
        if base > 0.0:
            return base ** expo
        return 1.0 if expo == 0.0 else (0.0 if expo > 0.0 else np.inf)

    s = (p - 1.0) * bsum ** (1.0 / p - 2.0)
    m11 = s * pow_nn(a1, p - 2.0) * a2 ** p
    m22 = s * pow_nn(a2, p - 2.0) * a1 ** p
    m12 = -s * (a1 ** (p - 1.0)) * (a2 ** (p - 1.0))
    if (b1 < 0) != (b2 < 0):
        m12 = -m12
    hess = ((1.0 - w1) * h1 + (1.0 - w2) * h2
            - m11 * np.outer(g1, g1) - m22 * np.outer(g2, g2)
            - m12 * (np.outer(g1, g2) + np.outer(g2, g1)))
    return val, grad, hess


def merged_value_grad_hess(m: MergedObstacle, x):
    """Value, gradient, and analytic Hessian of the composite at ``x``."""
    from .geometry import beta, beta_grad, beta_hess
    x = as_vec3(x)
    o = m.members[0]
    val, grad, hess = beta(o, x), beta_grad(o, x), beta_hess(o, x)
    for o in m.members[1:]:
        val, grad, hess = pair_value_grad_hess(
            val, grad, hess, beta(o, x), beta_grad(o, x), beta_hess(o, x),
            m.p_exponent)
    return val, grad, hess


def merged_hess(m: MergedObstacle, x, finite_difference: bool = False,
                h: float = 1e-6) -> np.ndarray:
    """Analytic composite Hessian; FD fallback for cross-validation in tests."""
    if not finite_difference:
        return merged_value_grad_hess(m, x)[2]
    x = as_vec3(x)
    H = np.empty((3, 3))
    for j in range(3):
        dp = x.copy()
        dm = x.copy()
        dp[j] += h
        dm[j] -= h
        H[:, j] = (merged_grad(m, dp) - merged_grad(m, dm)) / (2.0 * h)
    return 0.5 * (H + H.T)
