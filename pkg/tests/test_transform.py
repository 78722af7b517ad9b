"""Spherical-robot to point-robot transformation and ball-joint geometry."""

import numpy as np
import numpy.testing as npt
import pytest

import navfield as nf
from navfield.field import NavSpec
from navfield.geometry import Obstacle
from navfield.scene import BallJoint, Workspace
from navfield.transform import (FULL_ENCLOSURE, MINIMAL_EVOLUTE,
                                TransformError, evolute_containment_angle,
                                evolute_cubic_residual,
                                evolute_minimal_radius, failure_probabilities,
                                joint_expansion_factor, transform)


def _joint_workspace(angle=np.pi / 2, tube_r=0.2, joint_r=0.8):
    """Two capped cylinders meeting at the origin inside a joint sphere."""
    d1 = np.array([1.0, 0.0, 0.0])
    d2 = np.array([np.cos(angle), np.sin(angle), 0.0])
    obstacles = [
        Obstacle.capped_cylinder(0.3 * d1, 3.5 * d1, tube_r),
        Obstacle.capped_cylinder(0.3 * d2, 3.5 * d2, tube_r),
        Obstacle.sphere([0.0, 0.0, 0.0], joint_r),
    ]
    w = Workspace(5.0, obstacles)
    w.joints.append(BallJoint(center=np.zeros(3), radius=joint_r,
                              members=(0, 1), obstacle_index=2))
    return w


class TestExpansionFactors:
    def test_full_enclosure_90deg(self):
        # perpendicular cylinders: extra expansion ~ 40% of R
        f = joint_expansion_factor(np.pi / 2, FULL_ENCLOSURE)
        assert f == pytest.approx(np.sqrt(2.0))
        assert f - 1.0 == pytest.approx(np.sqrt(2.0) - 1.0)

    def test_full_enclosure_60deg(self):
        assert joint_expansion_factor(np.pi / 3, FULL_ENCLOSURE) == \
            pytest.approx(2.0)

    def test_full_enclosure_collinear_limit(self):
        assert joint_expansion_factor(np.pi, FULL_ENCLOSURE) == 1.0

    def test_minimal_evolute_90deg_is_one(self):
        assert joint_expansion_factor(np.pi / 2, MINIMAL_EVOLUTE) == \
            pytest.approx(1.0)

    def test_minimal_evolute_below_one_past_90deg(self):
        for deg in (100, 109, 150, 179):
            f = joint_expansion_factor(np.radians(deg), MINIMAL_EVOLUTE)
            assert f < 1.0

    def test_mode_ordering(self):
        # full enclosure >= minimal evolute on (0, 90]; equal only in limits
        for deg in np.linspace(5, 90, 30):
            th = np.radians(deg)
            assert (joint_expansion_factor(th, FULL_ENCLOSURE)
                    >= joint_expansion_factor(th, MINIMAL_EVOLUTE) - 1e-12)

    def test_theta_out_of_range(self):
        with pytest.raises(TransformError):
            joint_expansion_factor(0.0, FULL_ENCLOSURE)
        with pytest.raises(TransformError):
            joint_expansion_factor(3.5, FULL_ENCLOSURE)


class TestEvolute:
    def test_cubic_root_identity(self, rng):
        for theta in rng.uniform(0.05, np.pi - 0.05, 100):
            assert abs(evolute_cubic_residual(theta)) <= 1e-12

    def test_minimal_radius_matches_closed_form(self, rng):
        # the evolute construction and the closed-form factor agree
        for theta in rng.uniform(0.05, np.pi - 0.01, 100):
            b = rng.uniform(0.2, 2.0)
            r1 = evolute_minimal_radius(theta, b)
            r2 = b * joint_expansion_factor(theta, MINIMAL_EVOLUTE)
            assert abs(r1 - r2) <= 1e-10 * max(r1, 1.0)

    def test_circle_limit_stable(self):
        # approaching the circle case the minimal radius tends to the tube
        # radius; stable down to 179.9 degrees
        for deg in (170.0, 179.0, 179.9):
            r = evolute_minimal_radius(np.radians(deg), 1.0)
            assert np.isfinite(r)
        assert evolute_minimal_radius(np.radians(179.9), 1.0) == \
            pytest.approx(np.sqrt(0.5), abs=1e-3)

    def test_containment_angle_90deg(self):
        # at 90 deg the root hits sin^2 = 1: contact at the minor vertex
        assert evolute_containment_angle(np.pi / 2) == pytest.approx(np.pi / 2)

    def test_containment_angle_60deg(self):
        th = np.radians(60.0)
        phi = evolute_containment_angle(th)
        # verify via the implicit-ellipse equation: the curvature center
        # at phi lies on the ellipse
        s = np.sin(th / 2)
        h = 1.0 / s
        a, b = h, 1.0
        cx = (a * a - b * b) * np.cos(phi) ** 3 / a
        cy = (b * b - a * a) * np.sin(phi) ** 3 / b
        assert cx ** 2 / a ** 2 + cy ** 2 / b ** 2 == pytest.approx(1.0,
                                                                    abs=1e-10)

    def test_pi_convention(self):
        assert evolute_containment_angle(np.pi) == 0.0


class TestTransform:
    def test_radii_expansion(self):
        w = Workspace(5.0, [Obstacle.sphere([2, 0, 0], 1.0)])
        res = transform(w, 0.25)
        assert res.point_workspace.outer_radius == 4.75
        assert res.point_workspace.obstacles[0].radius == 1.25

    def test_zero_radius_identity(self):
        w = _joint_workspace()
        res = transform(w, 0.0)
        assert res.point_workspace.outer_radius == w.outer_radius
        for o1, o2 in zip(w.obstacles, res.point_workspace.obstacles):
            assert o1.radius == o2.radius
            npt.assert_array_equal(o1.a, o2.a)
        assert res.p_fail_surface == 0.0 and res.p_fail_volume == 0.0

    def test_joint_expanded_more(self):
        w = _joint_workspace(angle=np.pi / 3)  # 60 deg: factor 2 (full)
        res = transform(w, 0.1, mode=FULL_ENCLOSURE)
        joint = res.point_workspace.obstacles[2]
        assert joint.radius == pytest.approx(0.8 + 0.1 * 2.0)
        tube = res.point_workspace.obstacles[0]
        assert tube.radius == pytest.approx(0.3)

    def test_merged_members_expand(self):
        m = nf.MergedObstacle((Obstacle.sphere([-0.5, 0, 0], 0.6),
                               Obstacle.sphere([0.5, 0, 0], 0.6)), 2.0)
        w = Workspace(5.0, [m])
        res = transform(w, 0.2)
        for member in res.point_workspace.obstacles[0].members:
            assert member.radius == pytest.approx(0.8)

    def test_robot_radius_bounds(self):
        w = Workspace(5.0, [Obstacle.sphere([2, 0, 0], 1.0)])
        with pytest.raises(TransformError):
            transform(w, 5.0)
        with pytest.raises(TransformError):
            transform(w, -0.1)

    def test_close_cylinders_rejected(self):
        w = Workspace(5.0, [
            Obstacle.capped_cylinder([-2, 0, 0], [-0.3, 0, 0], 0.2),
            Obstacle.capped_cylinder([0.3, 0.5, 0], [2, 0.5, 0], 0.2)])
        # surface gap ~ 0.38; 2R = 0.5 exceeds it and no joint covers them
        with pytest.raises(TransformError, match="ball joint"):
            transform(w, 0.25)

    def test_close_cylinders_at_joint_accepted(self):
        w = _joint_workspace()
        res = transform(w, 0.1)
        assert res.point_workspace is not None

    def test_cluster_rejected(self):
        spheres = [Obstacle.sphere([0.0, 0, 0], 0.4),
                   Obstacle.sphere([1.0, 0, 0], 0.4),
                   Obstacle.sphere([0.5, 0.87, 0], 0.4)]
        w = Workspace(5.0, spheres)  # pairwise gaps ~ 0.2
        with pytest.raises(TransformError, match="cluster"):
            transform(w, 0.15)

    def test_start_in_joint_shell_warned(self):
        w = _joint_workspace(angle=np.pi / 3, joint_r=0.8)
        # full enclosure factor 2: shell between 0.9 and 1.0 from center
        start = np.array([0.0, 0.0, 0.95])
        res = transform(w, 0.1, mode=FULL_ENCLOSURE,
                        starts=np.array([start]))
        assert any("expanded-joint-only" in m for m in res.warnings)

    def test_revalidation_attached(self):
        w = _joint_workspace()
        nav = NavSpec("psi", 6, [0.0, -2.0, 0.0])
        res = transform(w, 0.1, nav=nav)
        assert res.validation is not None
        assert res.validation.valid


class TestProbabilities:
    def test_no_joints_zero(self):
        w = Workspace(5.0, [Obstacle.sphere([2, 0, 0], 1.0)])
        res = transform(w, 0.2)
        assert failure_probabilities(res) == (0.0, 0.0)

    def test_volume_bound_zero_at_factor_one(self):
        # minimal evolute at 90 deg: h = 1 and the shell volume vanishes
        w = _joint_workspace(angle=np.pi / 2)
        res = transform(w, 0.1, mode=MINIMAL_EVOLUTE)
        _, pv = failure_probabilities(res, n_surface=500, n_volume=2000)
        assert pv == pytest.approx(0.0, abs=1e-12)

    def test_bounds_decrease_with_workspace_size(self):
        res_small = transform(_joint_workspace(angle=np.pi / 3), 0.1,
                              mode=FULL_ENCLOSURE)
        w_big = _joint_workspace(angle=np.pi / 3)
        w_big.outer_radius = 8.0
        res_big = transform(w_big, 0.1, mode=FULL_ENCLOSURE)
        ps_s, pv_s = failure_probabilities(res_small, n_surface=1000,
                                           n_volume=4000)
        ps_b, pv_b = failure_probabilities(res_big, n_surface=1000,
                                           n_volume=4000)
        assert ps_b < ps_s and pv_b < pv_s

    def test_probabilities_in_unit_interval(self):
        res = transform(_joint_workspace(angle=np.pi / 3), 0.12,
                        mode=FULL_ENCLOSURE)
        assert 0.0 <= res.p_fail_surface <= 1.0
        assert 0.0 <= res.p_fail_volume <= 1.0
