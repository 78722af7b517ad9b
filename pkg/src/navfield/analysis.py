"""Critical-point search, Morse classification, and tuning-parameter bounds.

The multi-start search minimizes ``|grad psi|^2`` (as a nonlinear
least-squares problem on the gradient components) from quasi-random
free-space seeds; converged points are deduplicated and classified from
the eigenvalues of the critical-point Hessian.  psi is used for search
conditioning; composing with a monotone map does not move critical points,
so the same points are critical for the base potential and phi.

The epsilon machinery reproduces the near-obstacle bound pipeline:
``eps0_prime[i]`` is the largest shell thickness on which the sharpened
attraction term dominates (closed form: the obstacle's implicit value at
the target), ``eps0_doubleprime[i]`` is a sampled min/max ratio over that
shell, and ``N(eps)`` bounds the tuning parameter that clears critical
points out of the bulk free space.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .field import (NavSpec, FieldError, eval as field_eval, gamma_d,
                    gamma_grad, hessian_at_critical, default_grad_tol,
                    _term_beta, _term_grad, _term_hess)
from .geometry import Obstacle, as_vec3, grad_norm_bound, \
    KIND_SPHERE, KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER
from .merge import MergedObstacle
from .scene import Workspace

CLASS_MINIMUM = "minimum"
CLASS_SADDLE = "saddle"
CLASS_MAXIMUM = "maximum"
CLASS_DEGENERATE = "degenerate"


@dataclass
class CriticalPoint:
    x: np.ndarray
    grad_norm: float
    eigenvalues: np.ndarray  # sorted ascending
    cls: str
    region: str  # "target" | "interior" | "near_boundary" | "near_obstacle(i)"

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "grad_norm": self.grad_norm,
                "eigenvalues": self.eigenvalues.tolist(), "class": self.cls,
                "region": self.region}


@dataclass
class CriticalPointReport:
    points: list = dc_field(default_factory=list)
    messages: list = dc_field(default_factory=list)

    def spurious_minima(self) -> list:
        return [p for p in self.points
                if p.cls == CLASS_MINIMUM and p.region != "target"]

    def saddles(self) -> list:
        return [p for p in self.points if p.cls == CLASS_SADDLE]

    def to_dict(self) -> dict:
        return {"points": [p.to_dict() for p in self.points],
                "messages": list(self.messages)}


def free_space_seeds(workspace: Workspace, n: int, seed: int,
                     margin: float = 1e-6) -> np.ndarray:
    """n quasi-random (Halton) points strictly inside the free space."""
    r0 = workspace.outer_radius
    packed = workspace.packed()
    sampler = qmc.Halton(d=3, scramble=True, seed=seed)
    out = []
    from . import _kernels
    for _ in range(200):
        pts = r0 * (2.0 * sampler.random(max(4 * n, 256)) - 1.0)
        betas = np.empty((len(pts), packed.n_terms))
        _kernels.batch_term_betas(np.ascontiguousarray(pts), packed.kinds,
                                  packed.params, packed.gstart, packed.gp,
                                  betas)
        keep = np.all(betas > margin * r0 * r0, axis=1)
        out.extend(pts[keep])
        if len(out) >= n:
            return np.array(out[:n])
    raise FieldError("could not sample enough free-space points")


def _filter_free(workspace: Workspace, pts: np.ndarray) -> np.ndarray:
    from . import _kernels
    if len(pts) == 0:
        return pts
    packed = workspace.packed()
    betas = np.empty((len(pts), packed.n_terms))
    _kernels.batch_term_betas(np.ascontiguousarray(pts), packed.kinds,
                              packed.params, packed.gstart, packed.gp, betas)
    return pts[np.all(betas > 0, axis=1)]


def search_seeds(workspace: Workspace, nav: NavSpec, n: int,
                 seed: int) -> np.ndarray:
    """Seed mix for the critical-point search.

    Non-target critical points concentrate near obstacle boundaries, so
    half the budget goes to shells around each obstacle and a slice to the
    classical saddle locations on the target-obstacle axes; the rest is
    quasi-random over the free space.
    """
    from .geometry import surface_samples
    prims = [obs for _, obs, _ in workspace.primitives()]
    chunks = [free_space_seeds(workspace, max(n // 2, 8), seed)]
    rng = np.random.default_rng(seed)
    if prims:
        per = max((n - n // 2 - n // 10) // len(prims), 4)
        for obs in prims:
            surf = surface_samples(obs, per,
                                   axial_extent=workspace.outer_radius)
            for f in (1.15, 1.4):
                skel = np.array([obs.skeleton_point(p) for p in surf])
                chunks.append(_filter_free(workspace, skel + f * (surf - skel)))
        # behind-obstacle axis points (target through skeleton, extended)
        axis_pts = []
        for obs in prims:
            s = obs.skeleton_point(nav.target)
            d = s - nav.target
            dn = np.linalg.norm(d)
            if dn < 1e-12:
                continue
            d = d / dn
            for f in (1.2, 1.5, 2.2):
                axis_pts.append(s + f * obs.radius * d)
        chunks.append(_filter_free(workspace, np.array(axis_pts)))
    seeds = np.concatenate([c for c in chunks if len(c)], axis=0)
    if len(seeds) > n:
        idx = rng.permutation(len(seeds))[:n]
        seeds = seeds[idx]
    return seeds


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 1e-300 else np.array([1.0, 0.0, 0.0])


def _classify(eigenvalues: np.ndarray, eig_tol_rel: float = 1e-7) -> str:
    tol = eig_tol_rel * np.max(np.abs(eigenvalues)) if np.any(eigenvalues) else 0.0
    if np.any(np.abs(eigenvalues) <= tol):
        return CLASS_DEGENERATE
    if np.all(eigenvalues > 0):
        return CLASS_MINIMUM
    if np.all(eigenvalues < 0):
        return CLASS_MAXIMUM
    return CLASS_SADDLE


def _region(workspace: Workspace, nav: NavSpec, x: np.ndarray,
            merge_radius: float) -> str:
    if np.linalg.norm(x - nav.target) <= merge_radius:
        return "target"
    r0 = workspace.outer_radius
    b0 = workspace.boundary_beta(x)
    best = ("near_boundary", b0 / (r0 * r0))
    for i, obs in enumerate(workspace.obstacles):
        if isinstance(obs, MergedObstacle):
            scale = max(m.radius for m in obs.members) ** 2
        else:
            scale = obs.radius ** 2
        rel = _term_beta(obs, x) / scale
        if rel < best[1]:
            best = (f"near_obstacle({i})", rel)
    return best[0] if best[1] < 1.0 else "interior"


def find_critical_points(spec: NavSpec, workspace: Workspace,
                         n_starts: int = 200, seed: int = 0,
                         grad_tol: float = None) -> CriticalPointReport:
    """Locate and classify the critical points of the psi potential."""
    psi_spec = spec.with_potential("psi")
    if grad_tol is None:
        grad_tol = max(default_grad_tol(psi_spec, workspace), 1e-12)
    r0 = workspace.outer_radius
    merge_radius = 1e-5 * r0
    report = CriticalPointReport()

    def residual(x):
        ev = field_eval(psi_spec, workspace, x)
        return ev.gradient

    seeds = search_seeds(workspace, psi_spec, n_starts, seed)
    found = []
    n_fail = 0
    for x0 in seeds:
        try:
            sol = least_squares(residual, x0, method="lm", xtol=1e-14,
                                ftol=1e-14, gtol=1e-14, max_nfev=400)
        except Exception:
            n_fail += 1
            continue
        x = sol.x
        ev = field_eval(psi_spec, workspace, x)
        if ev.inside_obstacle or ev.on_boundary:
            n_fail += 1
            continue
        if np.linalg.norm(ev.gradient) > grad_tol:
            n_fail += 1
            continue
        found.append(x)
    if n_fail:
        report.messages.append(f"{n_fail}/{len(seeds)} starts did not converge")

    # dedupe, always keep the target
    points = [np.asarray(psi_spec.target, float)]
    for x in found:
        if all(np.linalg.norm(x - p) > merge_radius for p in points):
            points.append(x)

    # cross-check against the base potential: monotone composition must
    # leave the critical set unchanged, so fhat's gradient vanishes too
    fhat = psi_spec.with_potential("fhat")
    for x in points[1:]:
        probe = x + 0.01 * r0 * _unit(psi_spec.target - x)
        try:
            g_here = np.linalg.norm(field_eval(fhat, workspace, x).gradient)
            g_probe = np.linalg.norm(field_eval(fhat, workspace,
                                                probe).gradient)
        except FieldError:
            continue
        if g_here > 1e-4 * max(g_probe, 1e-12):
            report.messages.append(
                f"point {x.tolist()} fails the base-potential gradient "
                f"cross-check (|grad| {g_here:.2e} vs probe {g_probe:.2e})")

    for x in points:
        ev = field_eval(psi_spec, workspace, x)
        H = hessian_at_critical(psi_spec, workspace, x,
                                grad_tol=max(grad_tol, 1e-9))
        H = 0.5 * (H + H.T)
        eig = np.sort(np.linalg.eigvalsh(H))
        report.points.append(CriticalPoint(
            x=x, grad_norm=float(np.linalg.norm(ev.gradient)),
            eigenvalues=eig, cls=_classify(eig),
            region=_region(workspace, psi_spec, x, merge_radius)))
    return report


def no_local_minima_sweep(spec: NavSpec, workspace: Workspace,
                          k_range=range(1, 65), n_starts: int = 200,
                          seed: int = 0):
    """Spurious-minima count per k; returns (rows, smallest clean k or None)."""
    rows = []
    best = None
    for k in k_range:
        rep = find_critical_points(spec.with_k(int(k)), workspace,
                                   n_starts=n_starts, seed=seed)
        n_bad = len(rep.spurious_minima())
        rows.append((int(k), n_bad))
        if n_bad == 0 and best is None:
            best = int(k)
    return rows, best


# ---------------------------------------------------------------------------
# Q_i and the epsilon bounds
# ---------------------------------------------------------------------------

def q_i(spec: NavSpec, obstacle, x) -> float:
    """Near-obstacle test term ``(1/4) grad(gamma) . grad(beta_i) - gamma``."""
    x = as_vec3(x)
    g = gamma_grad(spec, x)
    return 0.25 * float(np.dot(g, _term_grad(obstacle, x))) - gamma_d(spec, x)


def _skeleton_distance_to_target(spec: NavSpec, obstacle: Obstacle) -> float:
    from .geometry import point_segment_distance
    pd = spec.target
    if obstacle.kind == KIND_SPHERE:
        return float(np.linalg.norm(pd - obstacle.a))
    if obstacle.kind == KIND_FULL_CYLINDER:
        d = pd - obstacle.a
        s = float(np.dot(d, obstacle.axis))
        return float(np.linalg.norm(d - s * obstacle.axis))
    if obstacle.kind == KIND_CAPPED_CYLINDER:
        return point_segment_distance(pd, obstacle.a, obstacle.b)
    raise FieldError("Q_i bound applies to internal obstacles")


def q_i_max_bound(spec: NavSpec, obstacle: Obstacle, eps: float) -> float:
    """Closed-form max of Q_i over the shell ``0 < beta_i < eps``.

    ``D (sqrt(eps + r^2) - D)`` with D the distance from the target to the
    obstacle skeleton (sphere center, cylinder axis, capsule axis segment).
    For cylinders this is the axis point chosen so the target offset is
    perpendicular to the axis, which collapses the cylindrical bound onto
    the spherical one.  Sound and tight for eps up to the bound's root.
    """
    if isinstance(obstacle, MergedObstacle):
        raise FieldError("closed-form Q_i bound covers primitive obstacles only")
    from .geometry import beta as prim_beta
    if prim_beta(obstacle, spec.target) <= 0:
        raise FieldError("target must lie strictly outside the obstacle")
    D = _skeleton_distance_to_target(spec, obstacle)
    return D * (np.sqrt(eps + obstacle.radius ** 2) - D)


def eps0_prime(spec: NavSpec, obstacle) -> float:
    """Largest eps with Q_i <= 0 on the shell: the implicit value at the target."""
    val = float(_term_beta(obstacle, spec.target))
    if val <= 0:
        raise FieldError("target must lie strictly outside the obstacle")
    return val


@dataclass
class ShellSamplingConfig:
    n_samples: int = 20000
    seed: int = 0
    denominator_floor: float = 1e-12
    low_confidence_fraction: float = 0.01


@dataclass
class EpsilonBounds:
    per_obstacle: list
    per_pair: list
    eps0: float
    N_of_eps: int


def _term_info(workspace, index):
    """(value_fn, grad_fn, hess_fn, axis_or_None, bbox) for a term index."""
    obs = workspace.obstacles[index]

    def bbox(o):
        pad = np.sqrt(o.radius ** 2 + 1.0)  # refined by caller with true eps
        if o.kind == KIND_SPHERE:
            lo, hi = o.a, o.a
        elif o.kind == KIND_CAPPED_CYLINDER:
            lo, hi = np.minimum(o.a, o.b), np.maximum(o.a, o.b)
        else:
            r0 = workspace.outer_radius
            lo, hi = o.a - r0 * 2, o.a + r0 * 2
        return lo, hi

    if isinstance(obs, MergedObstacle):
        los, his = zip(*(bbox(m) for m in obs.members))
        lo = np.min(np.stack(los), axis=0)
        hi = np.max(np.stack(his), axis=0)
        rad = max(m.radius for m in obs.members)
        axis = None
    else:
        lo, hi = bbox(obs)
        rad = obs.radius
        axis = obs.axis if obs.kind in (KIND_FULL_CYLINDER,
                                        KIND_CAPPED_CYLINDER) else None
    return obs, lo, hi, rad, axis


def _sample_shell(workspace, indices, eps_list, cfg):
    """Quasi-random free-space points with 0 < beta_i < eps_i for each i."""
    from . import _kernels
    packed = workspace.packed()
    los, his = [], []
    for idx, eps in zip(indices, eps_list):
        _, lo, hi, rad, _ = _term_info(workspace, idx)
        pad = np.sqrt(rad ** 2 + eps)
        los.append(lo - pad)
        his.append(hi + pad)
    lo = np.max(np.stack(los), axis=0)
    hi = np.min(np.stack(his), axis=0)
    if np.any(hi <= lo):
        return np.zeros((0, 3))
    sampler = qmc.Halton(d=3, scramble=True, seed=cfg.seed)
    kept = []
    need = cfg.n_samples
    for _ in range(60):
        u = sampler.random(max(8 * need, 1024))
        pts = lo + u * (hi - lo)
        betas = np.empty((len(pts), packed.n_terms))
        _kernels.batch_term_betas(np.ascontiguousarray(pts), packed.kinds,
                                  packed.params, packed.gstart, packed.gp,
                                  betas)
        ok = np.all(betas > 0.0, axis=1)
        for idx, eps in zip(indices, eps_list):
            ok &= betas[:, idx + 1] < eps  # term 0 is the boundary
        kept.extend(pts[ok])
        if len(kept) >= cfg.n_samples:
            break
    return np.array(kept[:cfg.n_samples]) if kept else np.zeros((0, 3))


def _bar_ratio_derivs(workspace, x, skip_terms):
    """log, grad/val, hess/val of the product of terms not in ``skip_terms``.

    Term index -1 denotes the workspace boundary.
    """
    vals, grads, hesses = [], [], []
    if -1 not in skip_terms:
        b0 = workspace.boundary_beta(x)
        vals.append(b0)
        grads.append(workspace.boundary_grad(x) / b0)
        hesses.append(-2.0 * np.eye(3) / b0)
    for i, obs in enumerate(workspace.obstacles):
        if i in skip_terms:
            continue
        b = float(_term_beta(obs, x))
        vals.append(b)
        grads.append(_term_grad(obs, x) / b)
        hesses.append(_term_hess(obs, x) / b)
    log_bar = float(np.sum(np.log(vals)))
    bg = np.sum(grads, axis=0) if grads else np.zeros(3)
    bh = np.zeros((3, 3))
    for i in range(len(vals)):
        bh += hesses[i]
        for j in range(len(vals)):
            if i != j:
                bh += np.outer(grads[i], grads[j])
    return log_bar, bg, bh


def _term_hess_ratio_batch(obstacle, pts, vals):
    """Batched ``H / b`` for one term, shape (N, 3, 3).

    Primitive Hessians are piecewise constant (a multiple of I plus a rank
    one axis correction), so this vectorizes; merged composites fall back
    to the per-point fold.
    """
    n = len(pts)
    if isinstance(obstacle, MergedObstacle):
        out = np.empty((n, 3, 3))
        for i, x in enumerate(pts):
            out[i] = _term_hess(obstacle, x) / vals[i]
        return out
    inv = 1.0 / vals
    eye = np.eye(3)
    if obstacle.kind == KIND_SPHERE:
        return 2.0 * inv[:, None, None] * eye
    if obstacle.kind == KIND_FULL_CYLINDER:
        proj = np.eye(3) - np.outer(obstacle.axis, obstacle.axis)
        return 2.0 * inv[:, None, None] * proj
    # capped cylinder: tube rows lose the axis component
    v = obstacle.axis
    s1 = (pts - obstacle.a) @ v
    tube = (s1 > 0.0) & (s1 < obstacle.length)
    out = 2.0 * inv[:, None, None] * eye
    out[tube] -= (2.0 * inv[tube])[:, None, None] * np.outer(v, v)
    return out


def _bar_ratio_derivs_batch(workspace, pts, skip_terms):
    """Vectorized ``_bar_ratio_derivs`` over an (N, 3) batch.

    The cross-gradient sum uses sum_{i != j} r_i r_j^T =
    (sum r)(sum r)^T - sum r_i r_i^T.
    """
    from .field import term_beta_grad_batch
    n = len(pts)
    log_bar = np.zeros(n)
    bg = np.zeros((n, 3))
    self_outer = np.zeros((n, 3, 3))
    hess_sum = np.zeros((n, 3, 3))
    if -1 not in skip_terms:
        b0 = workspace.outer_radius ** 2 - np.sum(pts * pts, axis=1)
        r = -2.0 * pts / b0[:, None]
        log_bar += np.log(b0)
        bg += r
        self_outer += np.einsum("ni,nj->nij", r, r)
        hess_sum += (-2.0 / b0)[:, None, None] * np.eye(3)
    for i, obs in enumerate(workspace.obstacles):
        if i in skip_terms:
            continue
        vals, grads = term_beta_grad_batch(obs, pts)
        r = grads / vals[:, None]
        log_bar += np.log(vals)
        bg += r
        self_outer += np.einsum("ni,nj->nij", r, r)
        hess_sum += _term_hess_ratio_batch(obs, pts, vals)
    bh = hess_sum + np.einsum("ni,nj->nij", bg, bg) - self_outer
    return log_bar, bg, bh


def _test_direction(obs_i, grad_i, axis_i, grad_j=None, axes=None):
    """Pinned test direction, or None when only ``u perp grad`` is required.

    Cylinders pin ``u = unit(grad x axis)``; intersecting pairs pin
    ``u = unit(grad_i x grad_j)`` falling back to the normalized axis sum
    when the gradients are parallel.  Spheres and merged composites leave
    the perpendicular direction free (caller maximizes over the circle).
    """
    g = np.asarray(grad_i, float)
    if grad_j is not None:
        u = np.cross(g, grad_j)
        if np.linalg.norm(u) > 1e-10 * np.linalg.norm(g) * np.linalg.norm(grad_j):
            return u / np.linalg.norm(u)
        u = axes[0] + axes[1]
        return u / np.linalg.norm(u)
    if axis_i is not None:
        u = np.cross(g, axis_i)
        n = np.linalg.norm(u)
        if n > 1e-12:
            return u / n
    return None


def _max_quadratic_perp(M: np.ndarray, g: np.ndarray) -> float:
    """Max of ``u^T M u`` over unit ``u`` perpendicular to ``g``."""
    g = g / np.linalg.norm(g)
    ref = np.array([1.0, 0.0, 0.0])
    if abs(g[0]) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(g, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(g, e1)
    B = np.stack([e1, e2], axis=1)
    M2 = B.T @ M @ B
    return float(np.max(np.linalg.eigvalsh(0.5 * (M2 + M2.T))))


def epsilon_bounds(spec: NavSpec, workspace: Workspace,
                   sampling_cfg: ShellSamplingConfig = None) -> EpsilonBounds:
    """Per-obstacle and per-pair epsilon bounds plus the N(eps) estimate."""
    cfg = sampling_cfg or ShellSamplingConfig()
    per_obstacle = []
    all_eps = []
    for i in range(len(workspace.obstacles)):
        ep = eps0_prime(spec, workspace.obstacles[i])
        pts = _sample_shell(workspace, [i], [ep], cfg)
        if len(pts) == 0:
            raise FieldError(f"empty shell sample for obstacle {i}")
        epp, excl_frac, low_conf = _eps_doubleprime(spec, workspace, pts, i,
                                                    None, cfg)
        per_obstacle.append({"index": i, "eps0_prime": ep,
                             "eps0_doubleprime": epp,
                             "excluded_fraction": excl_frac,
                             "low_confidence": low_conf})
        all_eps.extend([ep, epp])

    per_pair = []
    for i, j in _intersecting_term_pairs(workspace):
        ep = min(eps0_prime(spec, workspace.obstacles[i]),
                 eps0_prime(spec, workspace.obstacles[j]))
        pts = _sample_shell(workspace, [i, j], [ep, ep], cfg)
        if len(pts) == 0:
            raise FieldError(f"empty shell sample for pair ({i}, {j})")
        epp, excl_frac, low_conf = _eps_doubleprime(spec, workspace, pts, i,
                                                    j, cfg)
        per_pair.append({"i": i, "j": j, "eps0l_prime": ep,
                         "eps0l_doubleprime": epp,
                         "excluded_fraction": excl_frac,
                         "low_confidence": low_conf})
        all_eps.extend([ep, epp])

    eps0 = float(np.min(all_eps)) if all_eps else np.inf
    n_eps = n_of_eps(spec, workspace, eps0 / 2.0) if np.isfinite(eps0) else 1
    return EpsilonBounds(per_obstacle=per_obstacle, per_pair=per_pair,
                         eps0=eps0, N_of_eps=n_eps)


def _max_quad_perp_batch(M, g):
    """Row-wise max of ``u^T M u`` over unit ``u`` perpendicular to ``g``."""
    ghat = g / np.linalg.norm(g, axis=1, keepdims=True)
    ref = np.tile(np.array([1.0, 0.0, 0.0]), (len(g), 1))
    swap = np.abs(ghat[:, 0]) > 0.9
    ref[swap] = [0.0, 1.0, 0.0]
    e1 = np.cross(ghat, ref)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(ghat, e1)
    a = np.einsum("ni,nij,nj->n", e1, M, e1)
    b = np.einsum("ni,nij,nj->n", e1, M, e2)
    c = np.einsum("ni,nij,nj->n", e2, M, e2)
    return 0.5 * (a + c) + np.sqrt((0.5 * (a - c)) ** 2 + b * b)


def _eps_doubleprime(spec, workspace, pts, idx_i, idx_j, cfg):
    from .field import term_beta_grad_batch
    k = spec.k
    skip = {idx_i} if idx_j is None else {idx_i, idx_j}
    obs_i, _, _, _, axis_i = _term_info(workspace, idx_i)
    obs_j = axis_j = None
    if idx_j is not None:
        obs_j, _, _, _, axis_j = _term_info(workspace, idx_j)

    pts = np.ascontiguousarray(pts, dtype=float)
    bi, gI = term_beta_grad_batch(obs_i, pts)
    log_bar, bg, bh = _bar_ratio_derivs_batch(workspace, pts, skip)
    diff = pts - spec.target
    gamma = np.sum(diff * diff, axis=1)
    ggrad = 2.0 * diff
    qi = 0.25 * np.einsum("ni,ni->n", ggrad, gI) - gamma
    M = (1.0 - 1.0 / k) * np.einsum("ni,nj->nij", bg, bg) - bh

    free_rows = None  # rows whose test direction maximizes over the circle
    if idx_j is not None:
        bj, gJ = term_beta_grad_batch(obs_j, pts)
        qj = 0.25 * np.einsum("ni,ni->n", ggrad, gJ) - gamma
        num = 2.0 * (np.abs(qi) * bj + np.abs(qj) * bi)
        u = np.cross(gI, gJ)
        un = np.linalg.norm(u, axis=1)
        parallel = un <= 1e-10 * np.linalg.norm(gI, axis=1) \
            * np.linalg.norm(gJ, axis=1)
        ax_i = np.tile(axis_i, (len(pts), 1)) if axis_i is not None else gI
        ax_j = np.tile(axis_j, (len(pts), 1)) if axis_j is not None else gJ
        fb = ax_i + ax_j
        u[parallel] = fb[parallel]
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        quad = np.einsum("ni,nij,nj->n", u, M, u)
    else:
        num = 2.0 * np.abs(qi)
        if axis_i is not None:
            u = np.cross(gI, axis_i)
            un = np.linalg.norm(u, axis=1)
            free_rows = un <= 1e-12
            un[free_rows] = 1.0
            u /= un[:, None]
            quad = np.einsum("ni,nij,nj->n", u, M, u)
        else:
            free_rows = np.ones(len(pts), dtype=bool)
            quad = np.zeros(len(pts))
        if np.any(free_rows):
            quad[free_rows] = _max_quad_perp_batch(M[free_rows],
                                                   gI[free_rows])

    den_rel = 0.5 * np.einsum("ni,ni->n", bg, ggrad) + gamma * quad
    with np.errstate(divide="ignore"):
        log_den = np.log(np.abs(den_rel)) + 2.0 * log_bar
    excluded = (den_rel == 0.0) | (log_den < np.log(cfg.denominator_floor))
    pos = (den_rel > 0) & ~excluded
    pos_den_log_max = np.max(log_den[pos]) if np.any(pos) else -np.inf
    with np.errstate(divide="ignore"):
        log_num = np.where(num > 0, np.log(np.maximum(num, 1e-300))
                           + 2.0 * log_bar, np.inf)
    log_num_min = float(np.min(log_num))

    excl_frac = float(np.mean(excluded))
    low_conf = excl_frac > cfg.low_confidence_fraction
    if pos_den_log_max == -np.inf:
        return np.inf, excl_frac, low_conf  # constraint vacuous
    if log_num_min == np.inf:
        return 0.0, excl_frac, low_conf
    return float(np.exp(log_num_min - pos_den_log_max)), excl_frac, low_conf


def _intersecting_term_pairs(workspace):
    """Top-level term pairs whose primitive members overlap somewhere."""
    from .geometry import surface_gap
    prims = workspace.primitives()
    pairs = set()
    for a in range(len(prims)):
        for b in range(a + 1, len(prims)):
            _, oa, ta = prims[a]
            _, ob, tb = prims[b]
            if ta == tb:
                continue
            if surface_gap(oa, ob) < 0:
                pairs.add((min(ta, tb), max(ta, tb)))
    return sorted(pairs)


def max_grad_norm(workspace: Workspace, term_index: int,
                  n_samples: int = 4096, seed: int = 0) -> float:
    """Max of ``|grad beta_i|`` over the workspace ball.

    Closed form for primitives; sampled estimate for merged composites.
    Term index -1 denotes the boundary.
    """
    r0 = workspace.outer_radius
    if term_index == -1:
        return 2.0 * r0
    obs = workspace.obstacles[term_index]
    if isinstance(obs, Obstacle):
        return grad_norm_bound(obs, r0)
    sampler = qmc.Halton(d=3, scramble=True, seed=seed)
    pts = r0 * (2.0 * sampler.random(n_samples) - 1.0)
    pts = pts[np.linalg.norm(pts, axis=1) <= r0]
    best = 0.0
    for x in pts:
        best = max(best, float(np.linalg.norm(_term_grad(obs, x))))
    return best


def n_of_eps(spec: NavSpec, workspace: Workspace, eps: float) -> int:
    """Tuning bound ``ceil((1/2eps) max sqrt(gamma) sum_i max |grad beta_i|)``."""
    if not (eps > 0):
        raise FieldError("eps must be positive")
    r0 = workspace.outer_radius
    max_sqrt_gamma = r0 + float(np.linalg.norm(spec.target))
    total = max_grad_norm(workspace, -1)
    for i in range(len(workspace.obstacles)):
        total += max_grad_norm(workspace, i)
    return max(int(np.ceil(max_sqrt_gamma * total / (2.0 * eps))), 1)
