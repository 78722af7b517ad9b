"""Navigation potentials: attractive term, repulsion product, composites.

The base potential is ``gamma^k / beta`` where ``gamma = |x - target|^2``
and ``beta`` is the product of all repulsion terms (workspace boundary
times every obstacle).  Two bounded composites are built from it:

* ``phi = gamma / (gamma^k + beta)^(1/k)``
* ``psi = gamma / (gamma + beta^(1/k))``

Both map free space into [0, 1], vanish exactly at the target, and equal 1
on the free-space boundary.  Values and gradients are computed in log
space (signs permitting) so large ``k`` and meter-scale scenes do not
overflow; repulsion products below 1e-300 are floored and clamp the
composite value to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Obstacle, as_vec3, beta as prim_beta, beta_grad as prim_grad, \
    beta_hess as prim_hess
from .merge import MergedObstacle, merged_value_grad_hess

POTENTIAL_CODES = {"fhat": _kernels.POT_FHAT, "phi": _kernels.POT_PHI,
                   "psi": _kernels.POT_PSI}
POTENTIAL_NAMES = {v: k for k, v in POTENTIAL_CODES.items()}


class FieldError(ValueError):
    """Invalid potential choice or evaluation request."""


class BoundarySingularityError(FieldError):
    """The base potential gamma^k / beta was evaluated where beta <= 0."""


@dataclass(frozen=True)
class NavSpec:
    """Choice of potential, tuning exponent, and target point."""

    potential: str
    k: int
    target: np.ndarray

    def __post_init__(self):
        if self.potential not in POTENTIAL_CODES:
            raise FieldError(
                f"unknown potential {self.potential!r}; expected one of "
                f"{sorted(POTENTIAL_CODES)}")
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise FieldError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "target", as_vec3(self.target, "target"))

    @property
    def code(self) -> int:
        return POTENTIAL_CODES[self.potential]

    def with_k(self, k: int) -> "NavSpec":
        return NavSpec(self.potential, k, self.target)

    def with_potential(self, potential: str) -> "NavSpec":
        return NavSpec(potential, self.k, self.target)


@dataclass
class FieldEval:
    """One potential evaluation: value, gradient, and repulsion breakdown."""

    value: float
    gradient: np.ndarray
    gamma: float
    beta_total: float
    per_obstacle_beta: list
    on_boundary: bool = False
    inside_obstacle: bool = False


def gamma_d(spec: NavSpec, x) -> float:
    """Attractive potential ``|x - target|^2``."""
    d = as_vec3(x) - spec.target
    return float(np.dot(d, d))


def gamma_grad(spec: NavSpec, x) -> np.ndarray:
    """Gradient ``2 (x - target)``; the Hessian is constantly ``2 I``."""
    return 2.0 * (as_vec3(x) - spec.target)


def _term_beta(obstacle, x):
    if isinstance(obstacle, MergedObstacle):
        from .merge import merged_beta
        return merged_beta(obstacle, x)
    return prim_beta(obstacle, x)


def _term_grad(obstacle, x):
    if isinstance(obstacle, MergedObstacle):
        from .merge import merged_grad
        return merged_grad(obstacle, x)
    return prim_grad(obstacle, x)


def _term_hess(obstacle, x):
    if isinstance(obstacle, MergedObstacle):
        return merged_value_grad_hess(obstacle, x)[2]
    return prim_hess(obstacle, x)


def beta_product(workspace, x) -> tuple:
    """Product of all repulsion terms and the individual factors.

    Factor 0 is the workspace boundary; factor ``i`` is obstacle ``i-1``
    (merged composites contribute a single factor).
    """
    x = as_vec3(x)
    factors = [workspace.boundary_beta(x)]
    for obs in workspace.obstacles:
        factors.append(float(_term_beta(obs, x)))
    total = 1.0
    for f in factors:
        total *= f
    return total, factors


def beta_product_grad(workspace, x) -> np.ndarray:
    """Gradient of the repulsion product via prefix/suffix omitted products.

    Division-free: each term is weighted by the product of all *other*
    factors, well-defined even when some factor is exactly zero.
    """
    x = as_vec3(x)
    _, factors = beta_product(workspace, x)
    grads = [workspace.boundary_grad(x)]
    for obs in workspace.obstacles:
        grads.append(_term_grad(obs, x))
    m = len(factors)
    prefix = np.ones(m + 1)
    suffix = np.ones(m + 1)
    for i in range(m):
        prefix[i + 1] = prefix[i] * factors[i]
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] * factors[i]
    g = np.zeros(3)
    for i in range(m):
        g += prefix[i] * suffix[i + 1] * grads[i]
    return g


def eval(spec: NavSpec, workspace, x) -> FieldEval:
    """Evaluate the selected potential with its analytic gradient.

    ``phi``/``psi`` return exactly 1 on the free-space boundary; ``fhat``
    raises ``BoundarySingularityError`` there.
    """
    x = as_vec3(x)
    packed = workspace.packed()
    betas = np.empty(packed.n_terms)
    grad = np.empty(3)
    value, gamma, status = _kernels.eval_field(
        x, spec.target, spec.k, spec.code,
        packed.kinds, packed.params, packed.gstart, packed.gp, betas, grad)
    if spec.code == _kernels.POT_FHAT and status != 0:
        raise BoundarySingularityError(
            "gamma^k/beta is singular on the free-space boundary (beta <= 0)")
    beta_total = float(np.prod(betas))
    return FieldEval(value=float(value), gradient=grad, gamma=float(gamma),
                     beta_total=beta_total, per_obstacle_beta=betas.tolist(),
                     on_boundary=(status == 1), inside_obstacle=(status == 2))


def term_beta_grad_batch(obstacle, points):
    """Batched value and gradient of one obstacle's implicit function."""
    pts = np.ascontiguousarray(points, dtype=float)
    if isinstance(obstacle, MergedObstacle):
        kinds = np.array([m.kind for m in obstacle.members], dtype=np.int64)
        params = np.stack([m.pack() for m in obstacle.members])
        n, p = len(obstacle.members), obstacle.p_exponent
    else:
        kinds = np.array([obstacle.kind], dtype=np.int64)
        params = obstacle.pack()[None, :]
        n, p = 1, 2.0
    vals = np.empty(len(pts))
    grads = np.empty((len(pts), 3))
    _kernels.batch_term_beta_grad(pts, kinds, params, 0, n, p, vals, grads)
    return vals, grads


def eval_batch(spec: NavSpec, workspace, points):
    """Values, gradients, and status codes for an ``(N, 3)`` batch."""
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise FieldError(f"points must be (N, 3), got {pts.shape}")
    packed = workspace.packed()
    vals = np.empty(len(pts))
    grads = np.empty((len(pts), 3))
    status = np.empty(len(pts), dtype=np.int64)
    _kernels.batch_eval(pts, spec.target, spec.k, spec.code,
                        packed.kinds, packed.params, packed.gstart, packed.gp,
                        vals, grads, status)
    return vals, grads, status


# -- repulsion-product derivatives in ratio form ----------------------------

def _product_ratio_derivs(workspace, x):
    """``grad(beta)/beta`` and ``D2(beta)/beta`` plus per-term data.

    The ratio forms are sums of per-term relative quantities and stay
    representable even when the plain product overflows.  Requires all
    factors positive (interior of free space).
    """
    x = as_vec3(x)
    terms = [None] + list(workspace.obstacles)
    vals = []
    rgrads = []
    rhesses = []
    for obs in terms:
        if obs is None:
            b = workspace.boundary_beta(x)
            g = workspace.boundary_grad(x)
            h = -2.0 * np.eye(3)
        else:
            b = float(_term_beta(obs, x))
            g = _term_grad(obs, x)
            h = _term_hess(obs, x)
        if b <= 0.0:
            raise FieldError("ratio derivatives need x in the open free space")
        vals.append(b)
        rgrads.append(g / b)
        rhesses.append(h / b)
    grad_ratio = np.sum(rgrads, axis=0)
    hess_ratio = np.zeros((3, 3))
    for i in range(len(terms)):
        hess_ratio += rhesses[i]
        for j in range(len(terms)):
            if i != j:
                hess_ratio += np.outer(rgrads[i], rgrads[j])
    log_beta = float(np.sum(np.log(vals)))
    return log_beta, grad_ratio, hess_ratio


def hessian_at_critical(spec: NavSpec, workspace, x_c, grad_tol: float = None) -> np.ndarray:
    """Hessian of the chosen potential at a critical point ``x_c``.

    Uses the ratio-function simplification ``(1/d^2)(d D2n - n D2d)`` for
    the potential written as ``n/d``, valid where the gradient vanishes.
    Raises if the gradient norm at ``x_c`` exceeds ``grad_tol``.
    """
    x_c = as_vec3(x_c)
    ev = eval(spec, workspace, x_c)
    if grad_tol is None:
        grad_tol = default_grad_tol(spec, workspace)
    gnorm = float(np.linalg.norm(ev.gradient))
    if gnorm > grad_tol:
        raise FieldError(
            f"not a critical point: |grad| = {gnorm:.3e} > tol {grad_tol:.3e}")

    k = spec.k
    gamma = ev.gamma
    ggrad = gamma_grad(spec, x_c)
    ghess = 2.0 * np.eye(3)

    if gamma == 0.0:
        # target: n = gamma (phi, psi) or gamma^k (fhat); D2(n/d) = D2n/d
        log_beta, _, _ = _product_ratio_derivs(workspace, x_c)
        if spec.code == _kernels.POT_PHI:
            d = np.exp(log_beta / k)  # (gamma^k + beta)^(1/k) at gamma=0
            return ghess / d
        if spec.code == _kernels.POT_PSI:
            d = np.exp(log_beta / k)
            return ghess / d
        # fhat: n = gamma^k; degenerate (zero Hessian) for k >= 2
        if k == 1:
            return ghess * np.exp(-log_beta)
        return np.zeros((3, 3))

    log_beta, bg, bh = _product_ratio_derivs(workspace, x_c)
    lgamma = np.log(gamma)

    if spec.code == _kernels.POT_FHAT:
        # n = gamma^k, d = beta; scale out gamma^(k-?) and beta carefully
        # D2 n = gamma^(k-2) [k gamma ghess + k(k-1) ggrad ggrad^T]
        d2n_scaled = k * gamma * ghess + k * (k - 1.0) * np.outer(ggrad, ggrad)
        # Hessian = (1/beta^2)[beta D2n - gamma^k D2beta]
        #         = exp((k-2) lgamma - log_beta) [d2n_scaled - gamma^2 (D2beta/beta)]
        scale = np.exp((k - 2.0) * lgamma - log_beta)
        return scale * (d2n_scaled - gamma * gamma * bh)

    if spec.code == _kernels.POT_PSI:
        # n = gamma, d = gamma + beta^(1/k)
        bk = np.exp(log_beta / k)
        d = gamma + bk
        d2_bk = bk * (bh / k + (1.0 / k) * (1.0 / k - 1.0) * np.outer(bg, bg))
        d2d = ghess + d2_bk
        return (d * ghess - gamma * d2d) / (d * d)

    # phi: n = gamma, d = (gamma^k + beta)^(1/k)
    logS = np.logaddexp(k * lgamma, log_beta)
    logd = logS / k
    d = np.exp(logd)
    # nabla S / S and D2 S / S in ratio form:
    # S = gamma^k + beta; let wg = gamma^k / S, wb = beta / S
    wg = np.exp(k * lgamma - logS)
    wb = np.exp(log_beta - logS)
    gg_ratio = k * ggrad / gamma  # grad(gamma^k)/gamma^k
    gh_ratio = k * ghess / gamma + k * (k - 1.0) * np.outer(ggrad, ggrad) / gamma ** 2
    sg = wg * gg_ratio + wb * bg  # grad S / S
    sh = wg * gh_ratio + wb * bh  # D2 S / S
    # d = S^(1/k): D2 d = d [ (1/k) D2S/S + (1/k)(1/k - 1) (gradS/S)(gradS/S)^T ]
    d2d = d * (sh / k + (1.0 / k) * (1.0 / k - 1.0) * np.outer(sg, sg))
    return (d * ghess - gamma * d2d) / (d * d)


def default_grad_tol(spec: NavSpec, workspace) -> float:
    """Critical-point gradient tolerance: 1e-8 scaled by the scene gradient."""
    r0 = workspace.outer_radius
    probe = spec.target + np.array([0.37, -0.22, 0.18]) * r0 * 0.5
    if np.linalg.norm(probe) >= r0:
        probe = 0.5 * r0 * probe / np.linalg.norm(probe)
    try:
        scale = float(np.linalg.norm(eval(spec, workspace, probe).gradient))
    except FieldError:
        scale = 0.0
    return 1e-8 * (1.0 + scale)
