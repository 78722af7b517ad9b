"""Builders for the scenes used by the experiments and acceptance suite.

The truss is a cubic frame of 36 base obstacles: 12 edge cylinders, 8
corner ball-joint spheres, 8 wall anchors (half-cylinders whose outer caps
lie beyond the workspace wall), and 8 mid-edge spheres.  Edge cylinders
stop short of the corner points so adjacent edges stay disjoint while
their (virtual) intersection region is enclosed by the corner sphere; this
is the ball-joint pattern that survives the spherical-robot expansion.
"""

from __future__ import annotations

import numpy as np

from .field import NavSpec
from .geometry import Obstacle, fibonacci_directions
from .merge import MergedObstacle
from .scene import BallJoint, Scene, SimConfig, Workspace, validate

TRUSS_R0 = 5.0
TRUSS_HALF = 1.5          # cube half-side
TRUSS_CORNER_R = 0.5      # corner ball-joint sphere radius
TRUSS_TUBE_R = 0.15       # cylinder radius
TRUSS_MID_R = 0.3         # mid-edge sphere radius
TRUSS_SETBACK = 0.25      # cylinder end offset from the corner point


def truss_scene(k: int = 40, potential: str = "psi", damping: float = 0.6,
                merged: bool = False, n_starts: int = 100,
                rvachev_p: float = 2.0) -> Scene:
    """Cubic truss of 36 base obstacles, target at the origin.

    ``merged=True`` folds all 36 obstacles into a single Rvachev composite
    (ball-joint metadata is dropped; a composite has no per-sphere joints).
    """
    L = TRUSS_HALF
    corners = [np.array([sx * L, sy * L, sz * L])
               for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]

    edges = []   # (corner_a_idx, corner_b_idx)
    for i, a in enumerate(corners):
        for j in range(i + 1, len(corners)):
            if np.sum(np.abs(a - corners[j])) == 2 * L:  # differ in one axis
                edges.append((i, j))
    assert len(edges) == 12

    obstacles: list = []
    corner_members = {i: [] for i in range(8)}

    edge_indices = []
    for (ia, ib) in edges:
        a, b = corners[ia], corners[ib]
        u = (b - a) / np.linalg.norm(b - a)
        p1 = a + TRUSS_SETBACK * u
        p2 = b - TRUSS_SETBACK * u
        idx = len(obstacles)
        obstacles.append(Obstacle.capped_cylinder(p1, p2, TRUSS_TUBE_R))
        corner_members[ia].append(idx)
        corner_members[ib].append(idx)
        edge_indices.append(idx)

    anchor_indices = []
    for i, c in enumerate(corners):
        ahat = c / np.linalg.norm(c)
        p1 = c + TRUSS_SETBACK * ahat
        p2 = (TRUSS_R0 + 1.0) * ahat
        idx = len(obstacles)
        obstacles.append(Obstacle.capped_cylinder(p1, p2, TRUSS_TUBE_R))
        corner_members[i].append(idx)
        anchor_indices.append(idx)

    joint_specs = []
    for i, c in enumerate(corners):
        idx = len(obstacles)
        obstacles.append(Obstacle.sphere(c, TRUSS_CORNER_R))
        joint_specs.append((idx, tuple(corner_members[i])))

    # mid-edge spheres on the 8 edges running along x and y
    n_mid = 0
    for (ia, ib) in edges:
        d = corners[ib] - corners[ia]
        if abs(d[2]) > 0:  # skip z-direction edges
            continue
        mid = 0.5 * (corners[ia] + corners[ib])
        obstacles.append(Obstacle.sphere(mid, TRUSS_MID_R))
        n_mid += 1
    assert n_mid == 8 and len(obstacles) == 36

    if merged:
        workspace = Workspace(TRUSS_R0,
                              [MergedObstacle(tuple(obstacles), rvachev_p)])
    else:
        workspace = Workspace(TRUSS_R0, obstacles)
        for idx, members in joint_specs:
            workspace.joints.append(
                BallJoint(center=obstacles[idx].a, radius=obstacles[idx].radius,
                          members=members, obstacle_index=idx))

    nav = NavSpec(potential, k, np.zeros(3))
    starts = boundary_adjacent_starts(workspace, n_starts, margin=0.5,
                                      clearance=0.25)
    return Scene(workspace=workspace, nav=nav,
                 sim=SimConfig(damping_c=damping), starts=starts)


def boundary_adjacent_starts(workspace: Workspace, n: int, margin: float = 0.5,
                             clearance: float = 0.2) -> np.ndarray:
    """n starts near the workspace wall with clearance from every obstacle."""
    r = workspace.outer_radius - margin
    out = []
    factor = 2
    while len(out) < n and factor <= 64:
        out = []
        for d in fibonacci_directions(factor * n):
            p = r * d
            ok = workspace.boundary_beta(p) > 0
            for _, obs, _ in workspace.primitives():
                if obs.surface_distance(p) < clearance:
                    ok = False
                    break
            if ok:
                out.append(p)
            if len(out) == n:
                break
        factor *= 2
    if len(out) < n:
        raise ValueError(f"could only place {len(out)}/{n} boundary starts")
    return np.array(out)


def tetrahedron_scene(k: int = 5, n_starts: int = 100) -> Scene:
    """Four half-cylinders from a near-common point at ~109.5 deg pairwise.

    No ball joint is declared: the pairwise direction angles exceed 90 deg,
    where the minimal-evolute factor drops below one and the enclosing
    sphere is unnecessary.  The like-sign axis offsets keep the four caps
    from coinciding exactly.
    """
    r0 = 5.0
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                    dtype=float) / np.sqrt(3.0)
    obstacles = []
    for d in dirs:
        p1 = 0.12 * d
        p2 = (r0 + 1.0) * d
        obstacles.append(Obstacle.capped_cylinder(p1, p2, 0.25))
    workspace = Workspace(r0, obstacles)
    nav = NavSpec("psi", k, np.array([1.5, 0.0, 0.0]))
    starts = boundary_adjacent_starts(workspace, n_starts, margin=0.5,
                                      clearance=0.3)
    return Scene(workspace=workspace, nav=nav, sim=SimConfig(damping_c=0.6),
                 starts=starts)


def perpendicular_cylinders_scene(k: int = 5, n_starts: int = 100) -> Scene:
    """Three mutually perpendicular full cylinders through the origin."""
    r0 = 5.0
    r = 0.3
    obstacles = [
        Obstacle.full_cylinder([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], r),
        Obstacle.full_cylinder([0.0, 0.0, 0.0], [0.0, 1.0, 0.0], r),
        Obstacle.full_cylinder([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], r),
    ]
    workspace = Workspace(r0, obstacles)
    nav = NavSpec("psi", k, np.array([1.5, 0.0, 1.5]))
    starts = boundary_adjacent_starts(workspace, n_starts, margin=0.5,
                                      clearance=0.3)
    return Scene(workspace=workspace, nav=nav, sim=SimConfig(damping_c=0.6),
                 starts=starts)


def plateau_scene(k: int = 40, n_starts: int = 8) -> Scene:
    """Compact scene contrasting phi's flat plateau against psi.

    Starts sit where the attraction term exceeds 1, so phi at large k is
    nearly flat there while psi keeps its slope.
    """
    r0 = 5.0
    obstacles = [
        Obstacle.sphere([0.55, 0.0, -0.55], 0.2),
        Obstacle.sphere([-0.55, 0.2, -0.55], 0.2),
    ]
    workspace = Workspace(r0, obstacles)
    nav = NavSpec("psi", k, np.zeros(3))
    # ring radius tuned so gamma^k sits a few decades above beta: phi is
    # slow but finite there, psi unaffected
    ring = []
    rad = 1.12
    for i in range(n_starts):
        ang = 2.0 * np.pi * (i + 0.5) / n_starts
        ring.append([rad * np.cos(ang), rad * np.sin(ang), 0.35])
    return Scene(workspace=workspace, nav=nav, sim=SimConfig(damping_c=0.6),
                 starts=np.array(ring))


def random_scene(seed: int, n_obstacles: int = 8, r0: float = 5.0,
                 n_intersecting_pairs: int = 0, k: int = 12,
                 merge_pairs: bool = False, full_cylinders: int = 0,
                 max_tries: int = 200) -> Scene:
    """Seeded random valid workspace (rejection sampling until valid).

    ``n_intersecting_pairs`` forces that many deliberately overlapping
    sphere pairs / sphere-capsule pairs into the obstacle list;
    ``merge_pairs`` folds each forced pair into a Rvachev composite.
    ``full_cylinders`` adds that many wall-crossing full cylinders.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(max_tries):
        obstacles = []
        count = 0
        for _ in range(n_intersecting_pairs):
            c = rng.uniform(-0.55, 0.55, 3) * r0
            ra = rng.uniform(0.35, 0.6)
            rb = rng.uniform(0.35, 0.6)
            off = rng.normal(size=3)
            off *= rng.uniform(0.55, 0.9) * (ra + rb) / np.linalg.norm(off)
            first = Obstacle.sphere(c, ra)
            if rng.random() < 0.5:
                second = Obstacle.sphere(c + off, rb)
            else:
                axis = rng.normal(size=3)
                axis /= np.linalg.norm(axis)
                half = rng.uniform(0.5, 1.0)
                second = Obstacle.capped_cylinder(
                    c + off - half * axis, c + off + half * axis, rb * 0.7)
            if merge_pairs:
                obstacles.append(MergedObstacle((first, second), 2.0))
                count += 1
            else:
                obstacles.extend([first, second])
                count += 2
        for _ in range(full_cylinders):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            point = rng.uniform(-0.4, 0.4, 3) * r0
            obstacles.append(Obstacle.full_cylinder(point, axis,
                                                    rng.uniform(0.2, 0.4)))
            count += 1
        while count < n_obstacles:
            if rng.random() < 0.6:
                obstacles.append(Obstacle.sphere(
                    rng.uniform(-0.6, 0.6, 3) * r0, rng.uniform(0.3, 0.7)))
            else:
                c = rng.uniform(-0.5, 0.5, 3) * r0
                axis = rng.normal(size=3)
                axis /= np.linalg.norm(axis)
                half = rng.uniform(0.5, 1.2)
                obstacles.append(Obstacle.capped_cylinder(
                    c - half * axis, c + half * axis, rng.uniform(0.15, 0.35)))
            count += 1
        workspace = Workspace(r0, obstacles)

        target = None
        for _ in range(100):
            cand = rng.uniform(-0.6, 0.6, 3) * r0
            if workspace.boundary_beta(cand) < 0.3 * r0 * r0:
                continue
            if all(obs.surface_distance(cand) > 0.4
                   for _, obs, _ in workspace.primitives()):
                target = cand
                break
        if target is None:
            continue
        nav = NavSpec("psi", k, target)
        report = validate(workspace, nav)
        if not report.valid:
            continue
        if n_intersecting_pairs:
            n_int = sum(1 for _, _, c in report.pair_classifications
                        if c == "intersecting")
            if n_int < n_intersecting_pairs:
                continue
        starts = boundary_adjacent_starts(workspace, 10, margin=0.6,
                                          clearance=0.3)
        return Scene(workspace=workspace, nav=nav,
                     sim=SimConfig(damping_c=0.6), starts=starts)
    raise ValueError(f"no valid random scene found for seed {seed}")


def merge_intersecting_pairs(workspace: Workspace, p: float = 2.0) -> Workspace:
    """New workspace with every intersecting obstacle group Rvachev-merged.

    Groups are the connected components of the pairwise-intersection graph
    among top-level primitive obstacles; singleton components pass through.
    """
    from .geometry import surface_gap
    obstacles = workspace.obstacles
    n = len(obstacles)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            oi, oj = obstacles[i], obstacles[j]
            if isinstance(oi, MergedObstacle) or isinstance(oj, MergedObstacle):
                continue
            if surface_gap(oi, oj) < 0:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    new_obstacles = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        idxs = groups[root]
        if len(idxs) == 1:
            new_obstacles.append(obstacles[idxs[0]])
        else:
            new_obstacles.append(MergedObstacle(
                tuple(obstacles[i] for i in idxs), p))
    return Workspace(workspace.outer_radius, new_obstacles)
