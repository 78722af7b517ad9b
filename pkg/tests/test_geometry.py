"""Implicit obstacle functions: values, gradients, Hessians, gluing."""

import numpy as np
import numpy.testing as npt
import pytest

from navfield.geometry import (GeometryError, Obstacle, beta, beta_grad,
                               beta_hess, grad_norm_bound,
                               point_segment_distance,
                               segment_segment_distance, skeleton_distance,
                               surface_gap, surface_samples)

from conftest import fd_gradient, fd_hessian, rel_err, random_obstacle


class TestValues:
    def test_boundary_at_center(self):
        assert beta(Obstacle.boundary(5.0), [0, 0, 0]) == 25.0

    def test_sphere_at_center(self):
        s = Obstacle.sphere([1, 0, 0], 0.5)
        assert beta(s, [1, 0, 0]) == -0.25

    def test_capped_tube_surface(self):
        cc = Obstacle.capped_cylinder([-1, 0, 0], [1, 0, 0], 0.5)
        assert beta(cc, [0, 0.5, 0]) == 0.0

    def test_capped_cap_region(self):
        # hand evaluation of the far-cap branch: |x - p2|^2 - r^2
        cc = Obstacle.capped_cylinder([-1, 0, 0], [1, 0, 0], 0.5)
        assert beta(cc, [2, 0, 0]) == pytest.approx(0.75)

    def test_full_cylinder(self):
        c = Obstacle.full_cylinder([0, 0, 0], [0, 0, 1], 0.5)
        assert beta(c, [1, 0, 7]) == pytest.approx(0.75)

    def test_sign_witnesses(self, rng):
        for _ in range(50):
            obs = random_obstacle(rng)
            assert beta(obs, obs.interior_witness()) < 0
            far = obs.interior_witness() + np.array([50.0, 1.0, 2.0])
            assert beta(obs, far) > 0


class TestGradients:
    def test_boundary(self):
        npt.assert_allclose(beta_grad(Obstacle.boundary(5.0), [1, 2, 3]),
                            [-2, -4, -6])

    def test_sphere(self):
        npt.assert_allclose(beta_grad(Obstacle.sphere([1, 0, 0], 0.5),
                                      [2, 0, 0]), [2, 0, 0])

    def test_capped_tube_branch(self):
        cc = Obstacle.capped_cylinder([-1, 0, 0], [1, 0, 0], 0.5)
        npt.assert_allclose(beta_grad(cc, [0, 2, 0]), [0, 4, 0])

    def test_finite_difference_consistency(self, rng):
        n_checked = 0
        while n_checked < 1000:
            obs = random_obstacle(rng)
            x = rng.uniform(-4, 4, 3)
            if abs(beta(obs, x)) < 1e-3:
                continue  # avoid gluing circles / surfaces
            if obs.kind == 3:
                s1 = float(np.dot(x - obs.a, obs.axis))
                if min(abs(s1), abs(s1 - obs.length)) < 1e-3:
                    continue
            g = beta_grad(obs, x)
            g_fd = fd_gradient(lambda y: beta(obs, y), x)
            assert rel_err(g, g_fd) <= 1e-5
            n_checked += 1

    def test_hessian_vs_differenced_gradient(self, rng):
        n_checked = 0
        while n_checked < 300:
            obs = random_obstacle(rng)
            x = rng.uniform(-4, 4, 3)
            if obs.kind == 3:
                s1 = float(np.dot(x - obs.a, obs.axis))
                if min(abs(s1), abs(s1 - obs.length)) < 1e-3:
                    continue
            H = beta_hess(obs, x)
            H_fd = fd_hessian(lambda y: beta_grad(obs, y), x)
            assert rel_err(H, H_fd) <= 1e-4
            n_checked += 1


class TestHessians:
    def test_boundary_constant(self):
        npt.assert_allclose(beta_hess(Obstacle.boundary(3.0), [1, 1, 1]),
                            -2 * np.eye(3))

    def test_sphere_constant(self):
        npt.assert_allclose(beta_hess(Obstacle.sphere([0, 1, 0], 1.0),
                                      [4, 4, 4]), 2 * np.eye(3))

    def test_tube_projector(self):
        cc = Obstacle.capped_cylinder([0, 0, -1], [0, 0, 1], 0.5)
        npt.assert_allclose(beta_hess(cc, [1, 0, 0]), np.diag([2.0, 2.0, 0.0]))

    def test_cap_region_spherical(self):
        cc = Obstacle.capped_cylinder([0, 0, -1], [0, 0, 1], 0.5)
        npt.assert_allclose(beta_hess(cc, [0, 0, 3]), 2 * np.eye(3))


class TestGluing:
    """The piecewise capped-cylinder form is C1 across the gluing circles."""

    def test_branch_gradients_agree_on_circle(self, rng):
        for _ in range(50):
            cc = random_obstacle(rng, "capped_cylinder")
            v = cc.axis
            ref = np.array([1.0, 0, 0]) if abs(v[0]) < 0.9 else np.array([0, 1.0, 0])
            n1 = np.cross(v, ref)
            n1 /= np.linalg.norm(n1)
            for endpoint in (cc.a, cc.b):
                for ang in rng.uniform(0, 2 * np.pi, 8):
                    n = np.cos(ang) * n1 + np.sin(ang) * np.cross(v, n1)
                    x = endpoint + cc.radius * n
                    tube = 2.0 * ((x - cc.a) - np.dot(v, x - cc.a) * v)
                    cap = 2.0 * (x - endpoint)
                    assert np.linalg.norm(tube - cap) <= 1e-9

    def test_case_partition_is_exhaustive_and_continuous(self, rng):
        # values agree across the branch boundary approached from both sides
        for _ in range(20):
            cc = random_obstacle(rng, "capped_cylinder")
            v = cc.axis
            perp = np.cross(v, [1.0, 0.3, -0.2])
            perp /= np.linalg.norm(perp)
            for endpoint, sgn in ((cc.a, -1.0), (cc.b, 1.0)):
                x0 = endpoint + 2.3 * cc.radius * perp
                for eps in (1e-7, 1e-9):
                    inside = beta(cc, x0 - sgn * eps * v)
                    outside = beta(cc, x0 + sgn * eps * v)
                    assert abs(inside - outside) < 1e-5


class TestConstruction:
    def test_nan_rejected(self):
        with pytest.raises(GeometryError):
            Obstacle.sphere([np.nan, 0, 0], 1.0)

    def test_negative_radius_rejected(self):
        with pytest.raises(GeometryError):
            Obstacle.sphere([0, 0, 0], -1.0)

    def test_degenerate_capped_cylinder_rejected(self):
        with pytest.raises(GeometryError):
            Obstacle.capped_cylinder([1, 1, 1], [1, 1, 1], 0.5)

    def test_axis_normalized(self):
        c = Obstacle.full_cylinder([0, 0, 0], [0, 0, 10.0], 0.5)
        npt.assert_allclose(np.linalg.norm(c.axis), 1.0, atol=1e-12)


class TestDistances:
    def test_point_segment(self):
        d = point_segment_distance([0, 1, 0], [-1, 0, 0], [1, 0, 0])
        assert d == pytest.approx(1.0)
        d = point_segment_distance([3, 0, 0], [-1, 0, 0], [1, 0, 0])
        assert d == pytest.approx(2.0)

    def test_segment_segment_crossing(self):
        d = segment_segment_distance([-1, 0, 0], [1, 0, 0],
                                     [0, -1, 1], [0, 1, 1])
        assert d == pytest.approx(1.0)

    def test_segment_segment_parallel(self):
        d = segment_segment_distance([-1, 0, 0], [1, 0, 0],
                                     [-1, 2, 0], [1, 2, 0])
        assert d == pytest.approx(2.0)

    def test_segment_segment_brute_force(self, rng):
        for _ in range(100):
            p = rng.uniform(-2, 2, (4, 3))
            d = segment_segment_distance(p[0], p[1], p[2], p[3])
            ts = np.linspace(0, 1, 60)
            pts1 = p[0] + ts[:, None] * (p[1] - p[0])
            pts2 = p[2] + ts[:, None] * (p[3] - p[2])
            brute = np.min(np.linalg.norm(pts1[:, None] - pts2[None], axis=2))
            assert d <= brute + 1e-9
            assert d >= brute - 0.05  # grid resolution slack

    def test_surface_gap_spheres(self):
        a = Obstacle.sphere([0, 0, 0], 1.0)
        b = Obstacle.sphere([3, 0, 0], 1.0)
        assert surface_gap(a, b) == pytest.approx(1.0)
        assert skeleton_distance(a, b) == pytest.approx(3.0)


class TestSurfaceSamples:
    def test_samples_lie_on_surface(self, rng):
        for kind in ("sphere", "capped_cylinder"):
            obs = random_obstacle(rng, kind)
            pts = surface_samples(obs, 200)
            vals = [abs(beta(obs, p)) for p in pts]
            assert max(vals) < 1e-9

    def test_full_cylinder_samples(self, rng):
        obs = random_obstacle(rng, "full_cylinder")
        pts = surface_samples(obs, 100, axial_extent=3.0)
        assert max(abs(beta(obs, p)) for p in pts) < 1e-9


class TestGradNormBound:
    def test_bound_holds_on_samples(self, rng):
        r0 = 5.0
        for _ in range(20):
            obs = random_obstacle(rng)
            bound = grad_norm_bound(obs, r0)
            for _ in range(50):
                x = rng.uniform(-1, 1, 3)
                x *= r0 * rng.random() ** (1 / 3) / max(np.linalg.norm(x), 1e-12)
                assert np.linalg.norm(beta_grad(obs, x)) <= bound + 1e-9
