"""Spherical-robot to point-robot workspace transformation.

Shrinking a radius-R spherical robot to a point expands every internal
obstacle radius by R and contracts the outer boundary by R.  Ball joints
(spheres enclosing the mutual intersection of capped cylinders) need more
than R so the expanded cylinders' intersection curves stay inside the
expanded sphere; two expansions are provided:

* full enclosure: ``R / sin(theta/2)`` (worst-case intersection fully
  inside the sphere),
* minimal evolute: ``R * h'(theta)`` with
  ``h' = sqrt((s^4 - s^2 + 1) / (s^2 (1 + s^2)))``, ``s = sin(theta/2)``;
  the smallest radius for which the protruding intersection ellipse keeps
  its evolute inside itself, preserving an escape direction along the
  curve.  ``h'(90 deg) = 1`` and ``h' < 1`` beyond, where the joint sphere
  is redundant.

``theta`` is the joint's minimum pairwise axis angle.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import qmc

from .field import NavSpec
from .geometry import (Obstacle, surface_gap, surface_samples,
                       KIND_SPHERE, KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER)
from .merge import MergedObstacle
from .scene import BallJoint, Workspace, validate

FULL_ENCLOSURE = "full"
MINIMAL_EVOLUTE = "minimal"


class TransformError(ValueError):
    """Transformation preconditions violated (clearances, radii)."""


def joint_expansion_factor(theta: float, mode: str) -> float:
    """Multiplier on R added to a ball joint's radius.

    ``theta = pi`` is the degenerate circle limit; both modes return 1.
    """
    if not (0.0 < theta <= np.pi):
        raise TransformError(f"theta must be in (0, pi], got {theta}")
    if theta == np.pi:
        return 1.0
    s = np.sin(theta / 2.0)
    if mode == FULL_ENCLOSURE:
        return 1.0 / s
    if mode == MINIMAL_EVOLUTE:
        s2 = s * s
        return float(np.sqrt((s2 * s2 - s2 + 1.0) / (s2 * (1.0 + s2))))
    raise TransformError(f"unknown expansion mode {mode!r}")


def evolute_containment_angle(theta: float) -> float:
    """Ellipse parameter angle where the evolute meets the ellipse.

    The intersection ellipse of two equal-radius cylinders at axis angle
    ``theta`` has aspect ``h = 1/sin(theta/2)``; the evolute crosses it at
    ``phi_k = arcsin(sqrt(x))`` with ``x = (2h^2-1)/(h^4-1)``.  For
    ``theta > pi/2`` the evolute lies strictly inside the ellipse and the
    angle saturates at pi/2; ``theta = pi`` (circle: the evolute is a
    point) returns 0 by convention.
    """
    if not (0.0 < theta < np.pi):
        if theta == np.pi:
            return 0.0
        raise TransformError(f"theta must be in (0, pi), got {theta}")
    x = _evolute_root(theta)
    return float(np.arcsin(np.sqrt(min(x, 1.0))))


def _evolute_root(theta: float) -> float:
    """Root ``x = sin^2(phi_k)`` of the evolute-ellipse contact cubic.

    Evaluated via ``cos^2(theta/2)`` so the ``h^4 - 1`` style differences
    stay cancellation-free as theta approaches pi.
    """
    s2 = np.sin(theta / 2.0) ** 2
    c2 = np.cos(theta / 2.0) ** 2
    return s2 * (2.0 - s2) / (c2 * (1.0 + s2))


def evolute_cubic_residual(theta: float) -> float:
    """Residual of the contact cubic at its closed-form root (identity check).

    Normalized by the largest term magnitude: the raw coefficients diverge
    as theta approaches pi, so the relative residual is the quantity that
    stays at machine precision.  Coefficients are evaluated in
    ``cos^2(theta/2)`` form for the same reason.
    """
    s2 = np.sin(theta / 2.0) ** 2
    c2 = np.cos(theta / 2.0) ** 2
    x = _evolute_root(theta)
    coef3 = c2 * (1.0 + s2) / (s2 * s2)            # h^4 - 1
    coef0 = -s2 * (1.0 + c2) / (c2 * c2)           # 1 - h^4/(h^2-1)^2
    terms = np.array([coef3 * x ** 3, 3.0 * x ** 2, -3.0 * x, coef0])
    return float(np.sum(terms) / np.max(np.abs(terms)))


def evolute_minimal_radius(theta: float, tube_radius: float) -> float:
    """Minimal joint radius ``|tau(phi_k)|`` from the ellipse construction.

    ``tube_radius`` is the expanded cylinder radius (r + R); must agree
    with ``tube_radius * h'(theta)`` of the closed-form factor.
    """
    if theta == np.pi:
        return tube_radius
    s2 = np.sin(theta / 2.0) ** 2
    c2 = np.cos(theta / 2.0) ** 2
    x = _evolute_root(theta)  # algebraic continuation also valid for x > 1
    # a^2 cos^2(phi_k) + b^2 sin^2(phi_k) with a = b/sin(theta/2)
    return float(tube_radius * np.sqrt((1.0 - x * c2) / s2))


@dataclass
class TransformResult:
    """Transformed point-robot workspace plus bookkeeping for the bounds."""

    point_workspace: Workspace
    original_workspace: Workspace
    robot_radius: float
    expansion_mode: str
    joint_expansions: list
    warnings: list = dc_field(default_factory=list)
    p_fail_surface: float = 0.0
    p_fail_volume: float = 0.0
    validation: object = None


def _expand_obstacle(obs, R):
    if isinstance(obs, MergedObstacle):
        return MergedObstacle(tuple(m.with_radius(m.radius + R)
                                    for m in obs.members), obs.p_exponent)
    return obs.with_radius(obs.radius + R)


def _clearance_checks(workspace: Workspace, R: float):
    """Clearance rules for the spherical-robot model space.

    Cylinders closer than 2R must meet at a declared ball joint; no
    cluster of >= 3 pairwise-close obstacles outside a single joint.
    """
    errors = []
    if R == 0.0:
        return errors
    slack = 1e-9
    exempt_sets = [set(j.members) | {j.obstacle_index}
                   for j in workspace.joints]
    prims = workspace.primitives()
    close_pairs = []
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            li, oi, ti = prims[i]
            lj, oj, tj = prims[j]
            if ti == tj:
                continue
            gap = surface_gap(oi, oj)
            if gap >= 2.0 * R - slack:
                continue
            close_pairs.append((ti, tj))
            both_cyl = (oi.kind in (KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER)
                        and oj.kind in (KIND_FULL_CYLINDER,
                                        KIND_CAPPED_CYLINDER))
            if both_cyl and gap > 0:
                if not any({ti, tj} <= s for s in exempt_sets):
                    errors.append(
                        f"cylinders {ti} and {tj} are {gap:.4g} apart "
                        f"(< 2R = {2 * R:.4g}) and do not meet at a ball joint")
    # clusters: triangles in the close-pair graph outside a single joint
    adj = {}
    for a, b in close_pairs:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    seen = set()
    for a in adj:
        for b in adj[a]:
            for c in adj[a] & adj.get(b, set()):
                tri = tuple(sorted((a, b, c)))
                if len(set(tri)) < 3 or tri in seen:
                    continue
                seen.add(tri)
                if not any(set(tri) <= s for s in exempt_sets):
                    errors.append(
                        f"obstacles {tri} form a pairwise-close cluster "
                        f"(< 2R) outside a ball joint")
    return errors


def transform(workspace: Workspace, R: float, mode: str = MINIMAL_EVOLUTE,
              joints=None, nav: NavSpec = None, starts=None) -> TransformResult:
    """Expand obstacles by the robot radius and shrink the outer boundary.

    ``joints`` defaults to the workspace's declared ball joints.  When
    ``nav`` is given the output workspace is re-validated and violations
    land in the result warnings.  ``starts`` (optional ``(N, 3)``) are
    checked against the expanded-joint-only shells, the failure mode of
    the probability bounds.
    """
    if not (R >= 0.0):
        raise TransformError(f"robot radius must be >= 0, got {R}")
    if R >= workspace.outer_radius:
        raise TransformError(
            f"robot radius {R} must be smaller than the workspace radius "
            f"{workspace.outer_radius}")
    if joints is None:
        joints = list(workspace.joints)
    errors = _clearance_checks(workspace, R)
    if errors:
        raise TransformError("; ".join(errors))

    joint_index = {j.obstacle_index: j for j in joints}
    warnings = []
    joint_expansions = []
    new_obstacles = []
    new_joints = []
    for i, obs in enumerate(workspace.obstacles):
        if i in joint_index:
            j = joint_index[i]
            theta = j.theta(workspace)
            factor = joint_expansion_factor(theta, mode) if R > 0 else 1.0
            new_r = obs.radius + R * factor
            if factor < 1.0:
                warnings.append(
                    f"joint at obstacle {i}: theta = {np.degrees(theta):.1f} deg "
                    f"gives expansion factor {factor:.4f} < 1; the joint "
                    "sphere is redundant for this geometry")
            new_obstacles.append(obs.with_radius(new_r))
            joint_expansions.append({
                "obstacle_index": i, "theta": float(theta),
                "factor": float(factor), "original_radius": obs.radius,
                "expanded_radius": float(new_r)})
            new_joints.append(BallJoint(center=obs.a, radius=new_r,
                                        members=j.members, obstacle_index=i))
        else:
            new_obstacles.append(_expand_obstacle(obs, R))
    out = Workspace(workspace.outer_radius - R, new_obstacles, new_joints)

    result = TransformResult(point_workspace=out,
                             original_workspace=workspace,
                             robot_radius=R, expansion_mode=mode,
                             joint_expansions=joint_expansions,
                             warnings=warnings)

    if starts is not None and len(starts) and R > 0:
        starts = np.atleast_2d(np.asarray(starts, float))
        for si, s in enumerate(starts):
            for je in joint_expansions:
                obs = workspace.obstacles[je["obstacle_index"]]
                d = float(np.linalg.norm(s - obs.a))
                if obs.radius + R < d <= je["expanded_radius"]:
                    warnings.append(
                        f"start {si} lies in the expanded-joint-only shell of "
                        f"obstacle {je['obstacle_index']}; navigation cannot "
                        "begin there (consider an intermediate target that "
                        "first clears the joint region)")

    if nav is not None:
        report = validate(out, nav)
        result.validation = report
        for e in report.errors:
            warnings.append(f"post-transform validation: {e}")

    if R > 0:
        ps, pv = failure_probabilities(result)
        result.p_fail_surface = ps
        result.p_fail_volume = pv
    return result


def _standard_expansion(workspace: Workspace, R: float) -> Workspace:
    obstacles = [_expand_obstacle(o, R) for o in workspace.obstacles]
    return Workspace(workspace.outer_radius - R, obstacles, [])


def estimate_boundary_area(workspace: Workspace, n_per_surface: int = 4000,
                           seed: int = 0) -> float:
    """Sampled free-space boundary area: outer wall + exposed obstacle skin."""
    from .geometry import beta as prim_beta
    r0 = workspace.outer_radius
    prims = [obs for _, obs, _ in workspace.primitives()]

    def exposed_fraction_and_area(surf_obs, samples, total_area):
        keep = np.ones(len(samples), dtype=bool)
        for other in prims:
            if other is surf_obs:
                continue
            keep &= np.array([prim_beta(other, p) > 0 for p in samples])
        if surf_obs is not None:  # inside the ball
            keep &= np.linalg.norm(samples, axis=1) < r0
        return total_area * float(np.mean(keep))

    wall = Obstacle.boundary(r0)
    area = exposed_fraction_and_area(
        None, surface_samples(wall, n_per_surface), 4.0 * np.pi * r0 * r0)
    for obs in prims:
        if obs.kind == KIND_SPHERE:
            total = 4.0 * np.pi * obs.radius ** 2
            pts = surface_samples(obs, n_per_surface)
        elif obs.kind == KIND_CAPPED_CYLINDER:
            total = (2.0 * np.pi * obs.radius * obs.length
                     + 4.0 * np.pi * obs.radius ** 2)
            pts = surface_samples(obs, n_per_surface)
        else:
            extent = r0 + obs.radius
            total = 2.0 * np.pi * obs.radius * (2.0 * extent)
            pts = surface_samples(obs, n_per_surface, axial_extent=extent)
        area += exposed_fraction_and_area(obs, pts, total)
    return area


def estimate_free_volume(workspace: Workspace, n_samples: int = 20000,
                         seed: int = 0) -> float:
    """Sampled free-space volume inside the workspace ball."""
    from . import _kernels
    r0 = workspace.outer_radius
    packed = workspace.packed()
    sampler = qmc.Halton(d=3, scramble=True, seed=seed)
    pts = r0 * (2.0 * sampler.random(n_samples) - 1.0)
    betas = np.empty((len(pts), packed.n_terms))
    _kernels.batch_term_betas(np.ascontiguousarray(pts), packed.kinds,
                              packed.params, packed.gstart, packed.gp, betas)
    frac = float(np.mean(np.all(betas > 0, axis=1)))
    return frac * (2.0 * r0) ** 3


def failure_probabilities(result: TransformResult, n_surface: int = 4000,
                          n_volume: int = 20000, seed: int = 0):
    """Upper bounds on the start-position failure probability.

    ``P_s`` assumes starts uniform on the free-space boundary, ``P_v``
    uniform over the free volume, both after the standard expansion of
    every obstacle by R.  S and V come from quasi-random sampling
    estimators; the bounds inherit that estimator error.
    """
    if not result.joint_expansions or result.robot_radius == 0.0:
        return 0.0, 0.0
    R = result.robot_radius
    std = _standard_expansion(result.original_workspace, R)
    S = estimate_boundary_area(std, n_per_surface=n_surface, seed=seed)
    V = estimate_free_volume(std, n_samples=n_volume, seed=seed)
    s_sum = 0.0
    v_sum = 0.0
    for je in result.joint_expansions:
        s_sum += 4.0 * np.pi * je["expanded_radius"] ** 2
        r_bj = je["original_radius"]
        shell = (r_bj + je["factor"] * R) ** 3 - (r_bj + R) ** 3
        v_sum += (4.0 / 3.0) * np.pi * max(shell, 0.0)
    p_s = min(s_sum / S, 1.0) if S > 0 else 1.0
    p_v = min(v_sum / V, 1.0) if V > 0 else 1.0
    return float(p_s), float(p_v)


def min_original_clearance(result: TransformResult, points) -> float:
    """Minimum distance from trajectory points to original obstacle surfaces."""
    pts = np.atleast_2d(np.asarray(points, float))
    best = np.inf
    for _, obs, _ in result.original_workspace.primitives():
        for p in pts:
            best = min(best, obs.surface_distance(p))
    return float(best)
