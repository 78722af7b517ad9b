"""Implicit obstacle encodings: values, gradients, Hessians, packing.

Obstacle kinds and their implicit functions (positive outside, zero on the
surface, negative inside):

* workspace boundary: ``r0^2 - |x|^2``
* sphere:             ``|x - p|^2 - r^2``
* full cylinder:      ``|v x (x - p)|^2 - r^2`` (infinite axis)
* capped cylinder:    three-branch piecewise form gluing a finite tube to
  two hemispherical caps; C1 across the gluing circles.  Half-cylinders
  and finite cylinders are capped cylinders whose caps lie outside/inside
  the workspace ball; there is no separate kind.

All obstacle parameters are validated once at construction; the evaluation
functions assume validity and do no per-call checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

KIND_BOUNDARY = 0
KIND_SPHERE = 1
KIND_FULL_CYLINDER = 2
KIND_CAPPED_CYLINDER = 3

KIND_NAMES = {
    KIND_BOUNDARY: "boundary",
    KIND_SPHERE: "sphere",
    KIND_FULL_CYLINDER: "full_cylinder",
    KIND_CAPPED_CYLINDER: "capped_cylinder",
}

# capped cylinders with shorter axes are rejected as degenerate
MIN_AXIS_LENGTH = 1e-9
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid obstacle parameters."""


def as_vec3(value, name: str = "point") -> np.ndarray:
    """Return ``value`` as a float64 length-3 vector, rejecting NaN/Inf."""
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise GeometryError(f"{name} must have 3 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"{name} has non-finite components: {v}")
    return v


@dataclass(frozen=True)
class Obstacle:
    """A single validated primitive obstacle (or the workspace boundary).

    Use the ``boundary`` / ``sphere`` / ``full_cylinder`` / ``capped_cylinder``
    constructors rather than calling this directly.
    """

    kind: int
    radius: float
    a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.zeros(3))
    length: float = 0.0

    @staticmethod
    def boundary(radius: float) -> "Obstacle":
        if not (radius > 0 and np.isfinite(radius)):
            raise GeometryError(f"boundary radius must be positive, got {radius}")
        return Obstacle(KIND_BOUNDARY, float(radius))

    @staticmethod
    def sphere(center, radius: float) -> "Obstacle":
        c = as_vec3(center, "sphere center")
        if not (radius > 0 and np.isfinite(radius)):
            raise GeometryError(f"sphere radius must be positive, got {radius}")
        return Obstacle(KIND_SPHERE, float(radius), a=c)

    @staticmethod
    def full_cylinder(axis_point, axis_dir, radius: float) -> "Obstacle":
        p = as_vec3(axis_point, "axis point")
        v = as_vec3(axis_dir, "axis direction")
        n = np.linalg.norm(v)
        if n < MIN_AXIS_LENGTH:
            raise GeometryError("axis direction must be nonzero")
        v = v / n
        if not (radius > 0 and np.isfinite(radius)):
            raise GeometryError(f"cylinder radius must be positive, got {radius}")
        return Obstacle(KIND_FULL_CYLINDER, float(radius), a=p, axis=v)

    @staticmethod
    def capped_cylinder(p1, p2, radius: float) -> "Obstacle":
        e1 = as_vec3(p1, "endpoint p1")
        e2 = as_vec3(p2, "endpoint p2")
        d = e2 - e1
        length = float(np.linalg.norm(d))
        if length < MIN_AXIS_LENGTH:
            raise GeometryError(
                "capped cylinder endpoints coincide; use a sphere instead")
        if not (radius > 0 and np.isfinite(radius)):
            raise GeometryError(f"cylinder radius must be positive, got {radius}")
        return Obstacle(KIND_CAPPED_CYLINDER, float(radius), a=e1, b=e2,
                        axis=d / length, length=length)

    def __post_init__(self):
        # re-normalize defensively; invariant: unit axis within 1e-12
        if self.kind in (KIND_FULL_CYLINDER, KIND_CAPPED_CYLINDER):
            n = np.linalg.norm(self.axis)
            if abs(n - 1.0) > UNIT_TOL:
                raise GeometryError(f"axis direction not unit length: |v|={n}")

    # -- conversions ------------------------------------------------------

    def pack(self) -> np.ndarray:
        """Parameter row consumed by the kernels (see ``_kernels``)."""
        row = np.zeros(11)
        row[0:3] = self.a
        row[3:6] = self.b
        row[6:9] = self.axis
        row[9] = self.radius
        row[10] = self.length
        return row

    def with_radius(self, radius: float) -> "Obstacle":
        if self.kind == KIND_BOUNDARY:
            return Obstacle.boundary(radius)
        if self.kind == KIND_SPHERE:
            return Obstacle.sphere(self.a, radius)
        if self.kind == KIND_FULL_CYLINDER:
            return Obstacle.full_cylinder(self.a, self.axis, radius)
        return Obstacle.capped_cylinder(self.a, self.b, radius)

    # -- geometry helpers --------------------------------------------------

    def skeleton_point(self, x) -> np.ndarray:
        """Closest point to ``x`` on the obstacle skeleton.

        Skeletons: sphere center, full-cylinder axis line, capped-cylinder
        axis segment; the origin for the boundary.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == KIND_BOUNDARY:
            return np.zeros(3)
        if self.kind == KIND_SPHERE:
            return self.a.copy()
        if self.kind == KIND_FULL_CYLINDER:
            s = float(np.dot(x - self.a, self.axis))
            return self.a + s * self.axis
        s = float(np.dot(x - self.a, self.axis))
        s = min(max(s, 0.0), self.length)
        return self.a + s * self.axis

    def surface_distance(self, x) -> float:
        """Signed Euclidean distance from ``x`` to the obstacle surface.

        Positive outside, negative inside.  For the boundary: distance to
        the workspace sphere measured inward (positive inside the ball).
        """
        x = np.asarray(x, dtype=float)
        if self.kind == KIND_BOUNDARY:
            return self.radius - float(np.linalg.norm(x))
        return float(np.linalg.norm(x - self.skeleton_point(x))) - self.radius

    def interior_witness(self) -> np.ndarray:
        """A point in the deep interior (center / axis midpoint / origin)."""
        if self.kind == KIND_BOUNDARY:
            return np.zeros(3)
        if self.kind == KIND_SPHERE:
            return self.a.copy()
        if self.kind == KIND_FULL_CYLINDER:
            return self.a.copy()
        return 0.5 * (self.a + self.b)

    def to_dict(self) -> dict:
        if self.kind == KIND_SPHERE:
            return {"type": "sphere", "center": self.a.tolist(),
                    "radius": self.radius}
        if self.kind == KIND_FULL_CYLINDER:
            return {"type": "full_cylinder", "axis_point": self.a.tolist(),
                    "axis_dir": self.axis.tolist(), "radius": self.radius}
        if self.kind == KIND_CAPPED_CYLINDER:
            return {"type": "capped_cylinder", "p1": self.a.tolist(),
                    "p2": self.b.tolist(), "radius": self.radius}
        raise GeometryError("workspace boundary is not serialized as an obstacle")


def beta(obstacle: Obstacle, x) -> float:
    """Implicit value of ``obstacle`` at ``x``."""
    return float(_kernels.prim_beta(obstacle.kind, obstacle.pack(), as_vec3(x)))


def beta_grad(obstacle: Obstacle, x) -> np.ndarray:
    """Analytic gradient of ``beta`` at ``x``."""
    g = np.empty(3)
    _kernels.prim_beta_grad(obstacle.kind, obstacle.pack(), as_vec3(x), g)
    return g


def beta_hess(obstacle: Obstacle, x) -> np.ndarray:
    """Analytic Hessian of ``beta`` at ``x`` (symmetric, piecewise constant)."""
    x = as_vec3(x)
    if obstacle.kind == KIND_BOUNDARY:
        return -2.0 * np.eye(3)
    if obstacle.kind == KIND_SPHERE:
        return 2.0 * np.eye(3)
    v = obstacle.axis
    if obstacle.kind == KIND_FULL_CYLINDER:
        return 2.0 * (np.eye(3) - np.outer(v, v))
    s1 = float(np.dot(x - obstacle.a, v))
    if s1 <= 0.0 or s1 >= obstacle.length:
        return 2.0 * np.eye(3)
    return 2.0 * (np.eye(3) - np.outer(v, v))


# -- distance queries used by scene validation -----------------------------

def point_segment_distance(p, a, b) -> float:
    p = np.asarray(p, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-30:
        return float(np.linalg.norm(p - a))
    t = float(np.dot(p - a, ab)) / denom
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def segment_segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments [p0,p1] and [q0,q1].

    Candidate-based: interior critical point of the line pair plus the four
    clamped endpoint projections; exact for all configurations including
    parallel and degenerate segments.
    """
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    q0 = np.asarray(q0, float)
    q1 = np.asarray(q1, float)
    u = p1 - p0
    v = q1 - q0
    w0 = p0 - q0
    a = float(np.dot(u, u))
    b = float(np.dot(u, v))
    c = float(np.dot(v, v))
    d = float(np.dot(u, w0))
    e = float(np.dot(v, w0))
    den = a * c - b * b

    best = np.inf
    if den > 1e-14 * max(a * c, 1e-300):
        s = (b * e - c * d) / den
        t = (a * e - b * d) / den
        if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
            best = float(np.linalg.norm((p0 + s * u) - (q0 + t * v)))

    for p, sa, sb in ((q0, p0, p1), (q1, p0, p1), (p0, q0, q1), (p1, q0, q1)):
        best = min(best, point_segment_distance(p, sa, sb))
    return best


def skeleton_distance(o1: Obstacle, o2: Obstacle) -> float:
    """Distance between the skeletons of two (non-boundary) obstacles."""
    if KIND_BOUNDARY in (o1.kind, o2.kind):
        raise GeometryError("skeleton distance is for internal obstacles")
    # represent each skeleton as a (possibly degenerate or very long) segment
    def seg(o):
        if o.kind == KIND_SPHERE:
            return o.a, o.a
        if o.kind == KIND_FULL_CYLINDER:
            # long finite proxy for an infinite axis; validation scenes are
            # bounded by the workspace ball so 1e4 dwarfs any real extent
            return o.a - 1e4 * o.axis, o.a + 1e4 * o.axis
        return o.a, o.b
    a0, a1 = seg(o1)
    b0, b1 = seg(o2)
    return segment_segment_distance(a0, a1, b0, b1)


def surface_gap(o1: Obstacle, o2: Obstacle) -> float:
    """Signed gap between two obstacle surfaces (negative when overlapping)."""
    return skeleton_distance(o1, o2) - o1.radius - o2.radius


def fibonacci_directions(n: int) -> np.ndarray:
    """n roughly-uniform unit vectors (golden-spiral construction)."""
    i = np.arange(n, dtype=float)
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = 2.0 * np.pi * i / phi
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([s * np.cos(theta), s * np.sin(theta), z], axis=1)


def _axis_frame(v: np.ndarray):
    ref = np.array([1.0, 0.0, 0.0])
    if abs(v[0]) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    n1 = np.cross(v, ref)
    n1 /= np.linalg.norm(n1)
    n2 = np.cross(v, n1)
    return n1, n2


def surface_samples(obstacle: Obstacle, n: int, axial_extent: float = None) -> np.ndarray:
    """Roughly area-uniform surface points, shape ``(~n, 3)``.

    Capped cylinders split the budget between tube and caps by area, so
    the count is approximate.  A full cylinder has infinite extent: its
    tube is sampled over ``|s| <= axial_extent`` along the axis; callers
    inside a workspace should pass the outer radius (default: three tube
    radii).
    """
    if obstacle.kind == KIND_BOUNDARY:
        return obstacle.radius * fibonacci_directions(n)
    if obstacle.kind == KIND_SPHERE:
        return obstacle.a + obstacle.radius * fibonacci_directions(n)
    v = obstacle.axis
    n1, n2 = _axis_frame(v)
    r = obstacle.radius
    golden = np.pi * (3.0 - np.sqrt(5.0))
    if obstacle.kind == KIND_FULL_CYLINDER:
        extent = 3.0 * r if axial_extent is None else axial_extent
        i = np.arange(n, dtype=float)
        s = -extent + (2.0 * extent) * (i + 0.5) / n
        th = golden * i
        return (obstacle.a + s[:, None] * v
                + r * (np.cos(th)[:, None] * n1 + np.sin(th)[:, None] * n2))
    # capped cylinder: split by area between tube and the two hemispheres
    L = obstacle.length
    area_tube = 2.0 * np.pi * r * L
    area_caps = 4.0 * np.pi * r * r
    n_tube = max(int(round(n * area_tube / (area_tube + area_caps))), 1)
    n_cap = max((n - n_tube) // 2, 1)
    pts = []
    i = np.arange(n_tube, dtype=float)
    s = L * (i + 0.5) / n_tube
    th = golden * i
    pts.append(obstacle.a + s[:, None] * v
               + r * (np.cos(th)[:, None] * n1 + np.sin(th)[:, None] * n2))
    for center, sign in ((obstacle.a, -1.0), (obstacle.b, 1.0)):
        dirs = fibonacci_directions(2 * n_cap)
        dirs = dirs[np.dot(dirs, v) * sign > 0]
        pts.append(center + r * dirs)
    return np.concatenate(pts, axis=0)


def grad_norm_bound(obstacle: Obstacle, outer_radius: float) -> float:
    """Closed-form max of ``|grad beta|`` over the workspace ball.

    ``|grad beta(x)| = 2 dist(x, skeleton)``, maximized at the ball surface
    opposite the skeleton: ``2 (r0 + dist(origin, skeleton))``.
    """
    if obstacle.kind == KIND_BOUNDARY:
        return 2.0 * outer_radius
    if obstacle.kind == KIND_SPHERE:
        d0 = float(np.linalg.norm(obstacle.a))
    elif obstacle.kind == KIND_FULL_CYLINDER:
        proj = obstacle.a - float(np.dot(obstacle.a, obstacle.axis)) * obstacle.axis
        d0 = float(np.linalg.norm(proj))
    else:
        d0 = point_segment_distance(np.zeros(3), obstacle.a, obstacle.b)
    return 2.0 * (outer_radius + d0)
