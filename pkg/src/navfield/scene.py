"""Scene model: workspace, scene-file parsing, and admissibility validation.

Scene files are JSON with the top-level fields::

    {
      "version": 1,
      "outer_radius": 5.0,
      "target": [0.0, 0.0, 0.0],
      "potential": "psi",            # "phi" | "psi" | "fhat"
      "k": 40,
      "damping_c": 0.6,
      "obstacles": [ ... ],
      "starts": [[x, y, z], ...]     # optional
    }

Obstacle entries (``type`` selects the shape)::

    {"type": "sphere",          "center": [..], "radius": r}
    {"type": "full_cylinder",   "axis_point": [..], "axis_dir": [..], "radius": r}
    {"type": "capped_cylinder", "p1": [..], "p2": [..], "radius": r}
    {"type": "merged",          "p": 2.0, "members": [ <primitive entries> ]}
    {"type": "ball_joint",      "center": [..], "radius": r, "members": [i, ...]}

A ``ball_joint`` is a sphere obstacle plus joint metadata: ``members`` are
indices (into the obstacles array) of the capped cylinders whose mutual
intersection the sphere encloses.  Merged members fold in file order; the
order is semantically significant (the Rvachev union is not associative).

Unknown fields are rejected.  Numbers round-trip bit-identically through
parse -> serialize -> parse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import geometry
from .geometry import (Obstacle, as_vec3, surface_gap, surface_samples,
                       KIND_SPHERE, KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER)
from .merge import MergedObstacle, DEFAULT_P
from .field import NavSpec

SCENE_VERSION = 1

# pair classifications
DISJOINT = "disjoint"
ALLOWED_INTERSECTING = "intersecting"
TANGENT = "tangent"
FORBIDDEN = "forbidden"


class SceneError(ValueError):
    """Malformed scene file or semantic error in its fields."""


@dataclass
class PackedScene:
    """Flat kernel-ready arrays; term 0 is the workspace boundary."""

    kinds: np.ndarray
    params: np.ndarray
    gstart: np.ndarray
    gp: np.ndarray

    @property
    def n_terms(self) -> int:
        return len(self.gstart) - 1


@dataclass
class BallJoint:
    """Sphere enclosing the intersection region of >= 2 capped cylinders."""

    center: np.ndarray
    radius: float
    members: tuple
    obstacle_index: int

    def theta(self, workspace: "Workspace") -> float:
        """Minimum pairwise axis angle ``arcsin(|v_i x v_j|)`` of the members."""
        axes = []
        for m in self.members:
            obs = workspace.obstacles[m]
            axes.append(obs.axis)
        best = np.pi
        for i in range(len(axes)):
            for j in range(i + 1, len(axes)):
                cr = np.linalg.norm(np.cross(axes[i], axes[j]))
                best = min(best, float(np.arcsin(min(cr, 1.0))))
        return best


@dataclass
class Workspace:
    """Spherical workspace of radius ``outer_radius`` with internal obstacles.

    ``validation`` holds the report of the most recent ``validate`` call
    (None until validated).
    """

    outer_radius: float
    obstacles: list = dc_field(default_factory=list)
    joints: list = dc_field(default_factory=list)
    validation: object = None

    def __post_init__(self):
        if not (self.outer_radius > 0 and np.isfinite(self.outer_radius)):
            raise SceneError(f"outer radius must be positive, got {self.outer_radius}")

    def boundary(self) -> Obstacle:
        return Obstacle.boundary(self.outer_radius)

    def boundary_beta(self, x) -> float:
        x = np.asarray(x, float)
        return self.outer_radius ** 2 - float(np.dot(x, x))

    def boundary_grad(self, x) -> np.ndarray:
        return -2.0 * np.asarray(x, float)

    def primitives(self):
        """Flattened (label, obstacle, top_index) primitive list."""
        out = []
        for i, obs in enumerate(self.obstacles):
            if isinstance(obs, MergedObstacle):
                for j, m in enumerate(obs.members):
                    out.append((f"obstacle {i}.{j}", m, i))
            else:
                out.append((f"obstacle {i}", obs, i))
        return out

    def packed(self) -> PackedScene:
        """Kernel arrays for this workspace (cached; treat obstacles as
        immutable after the first evaluation)."""
        cached = getattr(self, "_packed_cache", None)
        if cached is not None and cached[0] == len(self.obstacles):
            return cached[1]
        packed = self._pack()
        self._packed_cache = (len(self.obstacles), packed)
        return packed

    def _pack(self) -> PackedScene:
        kinds = [geometry.KIND_BOUNDARY]
        params = [Obstacle.boundary(self.outer_radius).pack()]
        gstart = [0, 1]
        gp = [DEFAULT_P]
        for obs in self.obstacles:
            if isinstance(obs, MergedObstacle):
                for m in obs.members:
                    kinds.append(m.kind)
                    params.append(m.pack())
                gp.append(obs.p_exponent)
            else:
                kinds.append(obs.kind)
                params.append(obs.pack())
                gp.append(DEFAULT_P)
            gstart.append(len(kinds))
        return PackedScene(kinds=np.array(kinds, dtype=np.int64),
                           params=np.stack(params),
                           gstart=np.array(gstart, dtype=np.int64),
                           gp=np.array(gp, dtype=float))


@dataclass
class SimConfig:
    """Integrator settings for the damped second-order point mass."""

    damping_c: float = 0.6
    dt: float = 1e-3
    t_max: float = 600.0
    conv_pos_tol: float = 0.05
    conv_speed_tol: float = 0.05
    # stagnation fires when speed and gradient stay below tolerance away
    # from the target; the default sits under honest plateau-crawl
    # gradients (~1e-5) so slow traversals are not declared local minima
    grad_tol: float = 1e-6
    stagnation_steps: int = 1000
    integrator: str = "semi_implicit_euler"
    sample_stride: int = 10

    def __post_init__(self):
        if not (self.damping_c > 0):
            raise SceneError(f"damping must be positive, got {self.damping_c}")
        if not (0 < self.dt <= self.t_max):
            raise SceneError("dt must satisfy 0 < dt <= t_max")
        if not (self.conv_pos_tol > 0 and self.conv_speed_tol > 0):
            raise SceneError("convergence tolerances must be positive")
        if self.integrator not in ("semi_implicit_euler", "rk4"):
            raise SceneError(f"unknown integrator {self.integrator!r}")


@dataclass
class Scene:
    """Parsed scene bundle: workspace + navigation spec + sim config + starts."""

    workspace: Workspace
    nav: NavSpec
    sim: SimConfig
    starts: np.ndarray
    warnings: list = dc_field(default_factory=list)


@dataclass
class ValidationReport:
    """Pairwise classifications and admissibility findings."""

    pair_classifications: list = dc_field(default_factory=list)
    triple_intersection_found: bool = False
    messages: list = dc_field(default_factory=list)
    errors: list = dc_field(default_factory=list)

    @property
    def valid(self) -> bool:
        bad = any(c in (TANGENT, FORBIDDEN) for _, _, c in self.pair_classifications)
        return not bad and not self.triple_intersection_found and not self.errors

    def summary(self) -> str:
        lines = []
        status = "VALID" if self.valid else "INVALID"
        lines.append(f"workspace: {status}")
        for i, j, c in self.pair_classifications:
            lines.append(f"  pair ({i}, {j}): {c}")
        if self.triple_intersection_found:
            lines.append("  triple intersection found")
        for m in self.errors:
            lines.append(f"  error: {m}")
        for m in self.messages:
            lines.append(f"  note: {m}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"version", "outer_radius", "target", "potential", "k",
               "damping_c", "obstacles", "starts"}


def _require(entry: dict, keys, context: str):
    unknown = set(entry) - set(keys)
    if unknown:
        raise SceneError(f"{context}: unknown fields {sorted(unknown)}")
    missing = [k for k in keys if k not in entry and k not in ("starts",)]
    if missing:
        raise SceneError(f"{context}: missing fields {missing}")


def _parse_primitive(entry: dict, context: str, warnings: list) -> Obstacle:
    if not isinstance(entry, dict) or "type" not in entry:
        raise SceneError(f"{context}: obstacle entries need a 'type' field")
    t = entry["type"]
    try:
        if t == "sphere":
            _require(entry, ("type", "center", "radius"), context)
            return Obstacle.sphere(entry["center"], entry["radius"])
        if t == "full_cylinder":
            _require(entry, ("type", "axis_point", "axis_dir", "radius"), context)
            v = as_vec3(entry["axis_dir"], f"{context}.axis_dir")
            n = np.linalg.norm(v)
            if abs(n - 1.0) > 1e-12 and n > 1e-9:
                warnings.append(f"{context}: axis_dir normalized (|v| was {n:.6g})")
            return Obstacle.full_cylinder(entry["axis_point"], v, entry["radius"])
        if t == "capped_cylinder":
            _require(entry, ("type", "p1", "p2", "radius"), context)
            return Obstacle.capped_cylinder(entry["p1"], entry["p2"], entry["radius"])
    except geometry.GeometryError as e:
        raise SceneError(f"{context}: {e}") from e
    raise SceneError(f"{context}: unknown obstacle type {t!r}")


def parse_scene(text) -> Scene:
    """Parse scene text (bytes or str) into a not-yet-validated Scene."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"scene is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SceneError("scene root must be a JSON object")

    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise SceneError(f"unknown top-level fields {sorted(unknown)}")
    version = doc.get("version")
    if version != SCENE_VERSION:
        raise SceneError(
            f"unsupported scene version {version!r}; supported versions: "
            f"[{SCENE_VERSION}]")
    for key in ("outer_radius", "target", "potential", "k", "damping_c",
                "obstacles"):
        if key not in doc:
            raise SceneError(f"missing top-level field {key!r}")

    warnings: list = []
    obstacles: list = []
    joint_specs: list = []
    for idx, entry in enumerate(doc["obstacles"]):
        ctx = f"obstacles[{idx}]"
        if not isinstance(entry, dict) or "type" not in entry:
            raise SceneError(f"{ctx}: obstacle entries need a 'type' field")
        t = entry["type"]
        if t == "merged":
            _require(entry, ("type", "p", "members"), ctx)
            members = [_parse_primitive(m, f"{ctx}.members[{j}]", warnings)
                       for j, m in enumerate(entry["members"])]
            try:
                obstacles.append(MergedObstacle(tuple(members), float(entry["p"])))
            except ValueError as e:
                raise SceneError(f"{ctx}: {e}") from e
        elif t == "ball_joint":
            _require(entry, ("type", "center", "radius", "members"), ctx)
            try:
                sphere = Obstacle.sphere(entry["center"], entry["radius"])
            except geometry.GeometryError as e:
                raise SceneError(f"{ctx}: {e}") from e
            members = entry["members"]
            if (not isinstance(members, list) or len(members) < 2
                    or not all(isinstance(m, int) for m in members)):
                raise SceneError(f"{ctx}: members must list >= 2 obstacle indices")
            joint_specs.append((idx, tuple(members)))
            obstacles.append(sphere)
        else:
            obstacles.append(_parse_primitive(entry, ctx, warnings))

    try:
        workspace = Workspace(float(doc["outer_radius"]), obstacles)
    except (TypeError, ValueError) as e:
        raise SceneError(f"outer_radius: {e}") from e

    for idx, members in joint_specs:
        for m in members:
            if not (0 <= m < len(obstacles)):
                raise SceneError(f"obstacles[{idx}]: member index {m} out of range")
            if not (isinstance(obstacles[m], Obstacle)
                    and obstacles[m].kind == KIND_CAPPED_CYLINDER):
                raise SceneError(
                    f"obstacles[{idx}]: joint member {m} is not a capped cylinder")
        sphere = obstacles[idx]
        workspace.joints.append(BallJoint(center=sphere.a, radius=sphere.radius,
                                          members=members, obstacle_index=idx))

    try:
        nav = NavSpec(doc["potential"], doc["k"], doc["target"])
    except ValueError as e:
        raise SceneError(str(e)) from e
    try:
        sim = SimConfig(damping_c=float(doc["damping_c"]))
    except (TypeError, ValueError) as e:
        raise SceneError(f"damping_c: {e}") from e

    starts_doc = doc.get("starts", [])
    if not isinstance(starts_doc, list):
        raise SceneError("starts must be a list of [x, y, z] points")
    starts = np.array([as_vec3(s, f"starts[{i}]")
                       for i, s in enumerate(starts_doc)], dtype=float)
    if starts.size == 0:
        starts = np.zeros((0, 3))

    return Scene(workspace=workspace, nav=nav, sim=sim, starts=starts,
                 warnings=warnings)


def serialize_scene(scene: Scene) -> str:
    """Serialize a Scene back to its JSON text form."""
    obstacles = []
    joint_by_index = {j.obstacle_index: j for j in scene.workspace.joints}
    for i, obs in enumerate(scene.workspace.obstacles):
        if i in joint_by_index:
            j = joint_by_index[i]
            obstacles.append({"type": "ball_joint", "center": obs.a.tolist(),
                              "radius": obs.radius, "members": list(j.members)})
        else:
            obstacles.append(obs.to_dict())
    doc = {
        "version": SCENE_VERSION,
        "outer_radius": scene.workspace.outer_radius,
        "target": scene.nav.target.tolist(),
        "potential": scene.nav.potential,
        "k": scene.nav.k,
        "damping_c": scene.sim.damping_c,
        "obstacles": obstacles,
        "starts": [list(map(float, s)) for s in scene.starts],
    }
    return json.dumps(doc, indent=2)


def load_scene(path) -> Scene:
    with open(path, "rb") as f:
        return parse_scene(f.read())


# ---------------------------------------------------------------------------
# intersection-curve tracing
# ---------------------------------------------------------------------------

def _project_to_curve(x, o1, o2, iters=30, tol=1e-12):
    """Newton-project ``x`` onto the surface intersection of two obstacles."""
    from .geometry import beta, beta_grad
    x = x.copy()
    for _ in range(iters):
        f = np.array([beta(o1, x), beta(o2, x)])
        if abs(f[0]) < tol and abs(f[1]) < tol:
            return x
        J = np.stack([beta_grad(o1, x), beta_grad(o2, x)])
        JJt = J @ J.T
        try:
            lam = np.linalg.solve(JJt, f)
        except np.linalg.LinAlgError:
            return None
        x = x - J.T @ lam
    f = np.array([beta(o1, x), beta(o2, x)])
    if abs(f[0]) < 1e-9 and abs(f[1]) < 1e-9:
        return x
    return None


def _reference_point(o: Obstacle) -> np.ndarray:
    return o.interior_witness()


def _sampling_extent(o: Obstacle, other: Obstacle) -> float:
    """Axial extent covering the region where ``other`` can touch ``o``."""
    if o.kind != KIND_FULL_CYLINDER:
        return 0.0
    span = other.length if other.kind == KIND_CAPPED_CYLINDER else 0.0
    s = abs(float(np.dot(_reference_point(other) - o.a, o.axis)))
    return s + span + other.radius + o.radius + 1.0


def trace_intersection_curve(o1: Obstacle, o2: Obstacle, n_samples: int = 720,
                             max_steps_factor: int = 20):
    """Sample the closed curve where both obstacle surfaces vanish.

    Predictor-corrector tracing along ``grad b1 x grad b2``.  Returns an
    ``(m, 3)`` array (m ~ n_samples for closed curves), or None when no
    transversal surface intersection exists (disjoint or contained).
    """
    from .geometry import beta, beta_grad
    # seed: a surface point of either obstacle close to the other's zero set
    start = None
    for a, b in ((o1, o2), (o2, o1)):
        seeds = surface_samples(a, 400, axial_extent=_sampling_extent(a, b)
                                or None)
        bb = np.array([beta(b, p) for p in seeds])
        if bb.min() > 0 or bb.max() < 0:
            continue
        start = _project_to_curve(seeds[np.argmin(np.abs(bb))], o1, o2)
        if start is not None:
            break
    if start is None:
        return None

    r_scale = min(o1.radius, o2.radius)
    h = 2.0 * np.pi * r_scale / n_samples
    pts = [start]
    x = start
    max_steps = max_steps_factor * n_samples
    for step in range(max_steps):
        g1 = beta_grad(o1, x)
        g2 = beta_grad(o2, x)
        t = np.cross(g1, g2)
        tn = np.linalg.norm(t)
        if tn < 1e-14:
            break  # gradients parallel: tangential contact, not transversal
        x_pred = x + h * t / tn
        x_new = _project_to_curve(x_pred, o1, o2, iters=10)
        if x_new is None:
            break
        if step > 5 and np.linalg.norm(x_new - start) < 0.75 * h:
            break  # closed the loop
        pts.append(x_new)
        x = x_new
    return np.array(pts)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _boundary_checks(workspace, report):
    r0 = workspace.outer_radius
    tol = 1e-9 * r0
    for label, obs, _ in workspace.primitives():
        if obs.kind == KIND_SPHERE:
            d = float(np.linalg.norm(obs.a))
            if d - obs.radius >= r0:
                report.errors.append(f"{label}: sphere lies outside the workspace")
            elif d + obs.radius >= r0 - tol:
                report.errors.append(
                    f"{label}: sphere touches or crosses the workspace wall")
            if obs.radius - d >= r0:
                report.errors.append(f"{label}: sphere contains the workspace")
        elif obs.kind == KIND_CAPPED_CYLINDER:
            inside_caps = 0
            for end in (obs.a, obs.b):
                d = float(np.linalg.norm(end))
                if d + obs.radius < r0 - tol:
                    inside_caps += 1
                elif d - obs.radius <= r0 + tol:
                    report.errors.append(
                        f"{label}: hemispherical cap grazes the workspace wall")
            if inside_caps == 0:
                # both caps outside: tube must actually cross the ball
                d_axis = geometry.point_segment_distance(np.zeros(3), obs.a, obs.b)
                if d_axis - obs.radius >= r0:
                    report.errors.append(f"{label}: cylinder misses the workspace")
                elif d_axis + obs.radius >= r0 - tol:
                    report.errors.append(
                        f"{label}: cylinder internally tangent to the wall")
        elif obs.kind == KIND_FULL_CYLINDER:
            proj = obs.a - float(np.dot(obs.a, obs.axis)) * obs.axis
            d_axis = float(np.linalg.norm(proj))
            if d_axis - obs.radius >= r0:
                report.errors.append(f"{label}: cylinder misses the workspace")
            elif d_axis + obs.radius >= r0 - tol:
                report.errors.append(
                    f"{label}: cylinder internally tangent to the wall")


def _cylinder_pair_allowed(o1: Obstacle, o2: Obstacle, r0: float):
    """Admissibility rules for intersecting cylinder pairs: equal radii,
    perpendicular axes, and intersecting axis lines."""
    reasons = []
    if abs(o1.radius - o2.radius) > 1e-9 * r0:
        reasons.append("unequal radii")
    if abs(float(np.dot(o1.axis, o2.axis))) > 1e-7:
        reasons.append("axes not perpendicular")
    # line-line distance
    w = o2.a - o1.a
    cr = np.cross(o1.axis, o2.axis)
    crn = np.linalg.norm(cr)
    if crn < 1e-12:
        reasons.append("axes parallel")
    else:
        dist = abs(float(np.dot(w, cr))) / crn
        if dist > 1e-7 * r0:
            reasons.append("axes skew (do not intersect)")
    return reasons


def validate(workspace: Workspace, nav: NavSpec = None,
             curve_samples: int = 720,
             clearance_warn: float = 0.0) -> ValidationReport:
    """Classify obstacle pairs and check the admissibility rules.

    Pairwise surface intersections are classified analytically from
    skeleton distances.  Triple intersections are detected by sampling each
    intersecting pair's surface curve and testing every other obstacle
    there: a curve crossing a third surface produces an inadmissible
    free-boundary corner and is flagged; a curve lying entirely inside
    other obstacles is off the free boundary (the ball-joint enclosure
    pattern) and is allowed, which also exempts the enclosed pair from the
    cylinder-pair rules.  The sampling is a documented heuristic, not a
    certificate.
    """
    report = ValidationReport()
    r0 = workspace.outer_radius
    tol_tangent = 1e-9 * r0
    near_tangent = 1e-6 * r0
    tol_b = 1e-9 * r0 * r0

    prims = workspace.primitives()
    _boundary_checks(workspace, report)

    # target strictly inside free space (skipped when no NavSpec is given,
    # e.g. revalidating a bare transformed workspace)
    if nav is not None:
        target = nav.target
        if workspace.boundary_beta(target) <= 0:
            report.errors.append("target lies outside the workspace ball")
        for i, obs in enumerate(workspace.obstacles):
            from .field import _term_beta
            if _term_beta(obs, target) <= 0:
                report.errors.append(f"target lies inside obstacle {i}")

    # joint sanity
    for j, joint in enumerate(workspace.joints):
        if len(joint.members) < 2:
            report.errors.append(f"joint {j}: needs >= 2 member cylinders")
            continue
        radii = []
        for m in joint.members:
            obs = workspace.obstacles[m]
            radii.append(obs.radius)
            line_pt = obs.a
            d = np.linalg.norm(np.cross(joint.center - line_pt, obs.axis))
            if d > 1e-6 * r0:
                report.errors.append(
                    f"joint {j}: member {m} axis misses the joint center "
                    f"(offset {d:.3g})")
        if max(radii) - min(radii) > 1e-9 * r0:
            report.errors.append(f"joint {j}: member radii differ")
        if joint.theta(workspace) < 1e-9:
            report.errors.append(f"joint {j}: member axes are parallel")

    # pairwise classification over flattened primitives
    intersecting = []
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            li, oi, _ = prims[i]
            lj, oj, _ = prims[j]
            gap = surface_gap(oi, oj)
            if gap > tol_tangent:
                cls = DISJOINT
                if gap < near_tangent:
                    report.messages.append(
                        f"({li}, {lj}): near-tangent gap {gap:.3g} "
                        "(ill-conditioned saddle)")
                elif clearance_warn > 0 and gap < clearance_warn:
                    report.messages.append(
                        f"({li}, {lj}): clearance {gap:.3g} below "
                        f"{clearance_warn:.3g}")
            elif gap >= -tol_tangent:
                cls = TANGENT
                report.errors.append(f"({li}, {lj}): tangent obstacles")
            else:
                cls = ALLOWED_INTERSECTING
                both_cyl = (oi.kind in (KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER)
                            and oj.kind in (KIND_FULL_CYLINDER,
                                            KIND_CAPPED_CYLINDER))
                reasons = _cylinder_pair_allowed(oi, oj, r0) if both_cyl else []
                intersecting.append((i, j, reasons))
            report.pair_classifications.append((i, j, cls))

    # curve sampling: triple intersections and enclosure exemptions
    idx_of = {(i, j): nidx for nidx, (i, j, _) in
              enumerate(report.pair_classifications)}
    for i, j, reasons in intersecting:
        li, oi, ti = prims[i]
        lj, oj, tj = prims[j]
        curve = trace_intersection_curve(oi, oj, n_samples=curve_samples)
        if curve is None or len(curve) < 4:
            # no transversal curve: containment or numerically tangential
            cont = _containment_note(oi, oj, li, lj)
            if cont:
                report.messages.append(cont)
            else:
                report.errors.append(
                    f"({li}, {lj}): intersecting surfaces without a traceable "
                    "curve (tangential contact?)")
                report.pair_classifications[idx_of[(i, j)]] = (i, j, TANGENT)
            continue

        others_min = _others_min_beta(workspace, prims, i, j, curve)
        others_min = _refine_crossings(workspace, prims, i, j, oi, oj, curve,
                                       others_min, tol_b)
        has_exposed = bool(np.any(others_min > tol_b))
        has_buried = bool(np.any(others_min < -tol_b))
        has_grazing = bool(np.any(np.abs(others_min) <= tol_b))

        if has_grazing or (has_exposed and has_buried):
            report.triple_intersection_found = True
            report.errors.append(
                f"({li}, {lj}): intersection curve meets a third obstacle "
                "surface (triple intersection)")
        elif has_buried and not has_exposed:
            report.messages.append(
                f"({li}, {lj}): intersection fully enclosed by other "
                "obstacles (ball-joint pattern)")
            # enclosed curves are off the free boundary: cylinder-pair rules
            # do not apply
            reasons = []
        if reasons:
            report.pair_classifications[idx_of[(i, j)]] = (i, j, FORBIDDEN)
            report.errors.append(
                f"({li}, {lj}): forbidden cylinder intersection "
                f"({'; '.join(reasons)})")
    workspace.validation = report
    return report


def _containment_note(o1, o2, l1, l2):
    from .geometry import beta
    s1 = surface_samples(o1, 100, axial_extent=_sampling_extent(o1, o2) or None)
    if all(beta(o2, p) < 0 for p in s1):
        return f"({l1}, {l2}): {l1} is contained inside {l2}"
    s2 = surface_samples(o2, 100, axial_extent=_sampling_extent(o2, o1) or None)
    if all(beta(o1, p) < 0 for p in s2):
        return f"({l1}, {l2}): {l2} is contained inside {l1}"
    return None


def _others_min_beta(workspace, prims, i, j, pts):
    """Per-sample minimum of every *other* implicit value (incl. boundary)."""
    from .geometry import beta
    mins = np.full(len(pts), np.inf)
    for idx, (_, obs, _) in enumerate(prims):
        if idx in (i, j):
            continue
        vals = np.array([beta(obs, p) for p in pts])
        mins = np.minimum(mins, vals)
    b0 = np.array([workspace.boundary_beta(p) for p in pts])
    return np.minimum(mins, b0)


def _refine_crossings(workspace, prims, i, j, oi, oj, curve, others_min, tol_b):
    """8x re-sampling of curve arcs where the burial status flips."""
    status = np.sign(others_min)
    flips = np.nonzero(status[:-1] != status[1:])[0]
    if len(flips) == 0:
        return others_min
    extra = []
    for f in flips:
        a, b = curve[f], curve[f + 1]
        for t in np.linspace(0.0, 1.0, 10)[1:-1]:
            p = _project_to_curve(a + t * (b - a), oi, oj, iters=10)
            if p is not None:
                extra.append(p)
    if not extra:
        return others_min
    extra_min = _others_min_beta(workspace, prims, i, j, np.array(extra))
    return np.concatenate([others_min, extra_min])
