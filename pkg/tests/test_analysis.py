"""Critical-point machinery and the epsilon / N(eps) bounds."""

import numpy as np
import numpy.testing as npt
import pytest

import navfield as nf
from navfield import analysis, field
from navfield.analysis import (ShellSamplingConfig, eps0_prime,
                               epsilon_bounds, find_critical_points,
                               n_of_eps, no_local_minima_sweep, q_i,
                               q_i_max_bound)
from navfield.field import FieldError, NavSpec
from navfield.geometry import Obstacle, surface_samples

from conftest import random_obstacle


class TestQi:
    def test_zero_at_target(self):
        spec = NavSpec("psi", 4, [0.7, -0.3, 0.2])
        obs = Obstacle.sphere([2, 0, 0], 0.5)
        assert q_i(spec, obs, spec.target) == pytest.approx(0.0)

    def test_negative_between_target_and_sphere(self):
        # on the segment from the sphere center through the target,
        # grad(gamma).grad(beta) < 0 and gamma > 0
        spec = NavSpec("psi", 4, [0, 0, 0])
        obs = Obstacle.sphere([3, 0, 0], 0.5)
        x = np.array([1.5, 0, 0])
        assert q_i(spec, obs, x) < 0

    def test_shell_max_respects_bound_with_small_gap(self, rng):
        """Sampled shell max stays below the closed-form bound; the bound is
        tight (gap <= 5%) at eps = 0.01 r^2 for spheres."""
        spec = NavSpec("psi", 4, [0, 0, 0])
        obs = Obstacle.sphere([2.5, 0.5, -0.3], 0.8)
        eps = 0.01 * obs.radius ** 2
        bound = q_i_max_bound(spec, obs, eps)
        # sample the shell densely in the direction that attains the max
        best = -np.inf
        for _ in range(20000):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            rad = np.sqrt(rng.uniform(obs.radius ** 2, obs.radius ** 2 + eps))
            x = obs.a + rad * d
            best = max(best, q_i(spec, obs, x))
        assert best <= bound + 1e-12
        assert bound - best <= 0.05 * abs(bound)

    def test_bound_soundness_all_kinds(self, rng):
        spec = NavSpec("psi", 4, [0, 0, 0])
        tested = 0
        while tested < 100:
            obs = random_obstacle(rng)
            if nf.beta(obs, spec.target) <= 0.05:
                continue
            eps = rng.uniform(0.005, 0.5) * obs.radius ** 2
            bound = q_i_max_bound(spec, obs, eps)
            surf = surface_samples(obs, 400, axial_extent=6.0)
            for p in surf[::4]:
                sk = obs.skeleton_point(p)
                n = (p - sk) / np.linalg.norm(p - sk)
                rad = np.sqrt(np.linalg.norm(p - sk) ** 2
                              + rng.uniform(0, eps))
                x = sk + rad * n
                assert q_i(spec, obs, x) <= bound + 1e-9
            tested += 1

    def test_eps_prime_is_beta_at_target(self, rng):
        spec = NavSpec("psi", 4, [0.3, 0.1, -0.2])
        for _ in range(30):
            obs = random_obstacle(rng)
            b = nf.beta(obs, spec.target)
            if b <= 0.01:
                continue
            assert eps0_prime(spec, obs) == pytest.approx(b, abs=1e-14)

    def test_eps_prime_matches_bound_root_bisection(self, rng):
        """The closed form equals the bisected root of the bound."""
        spec = NavSpec("psi", 4, [0.3, 0.1, -0.2])
        checked = 0
        while checked < 25:
            obs = random_obstacle(rng)
            if nf.beta(obs, spec.target) <= 0.05:
                continue
            lo, hi = 1e-12, 1e4
            if q_i_max_bound(spec, obs, hi) < 0:
                continue  # target too far for the bracket
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if q_i_max_bound(spec, obs, mid) <= 0:
                    lo = mid
                else:
                    hi = mid
            assert abs(lo - eps0_prime(spec, obs)) <= 1e-10 * max(1.0, lo)
            checked += 1

    def test_bound_negative_at_zero_thickness(self):
        spec = NavSpec("psi", 4, [0, 0, 0])
        obs = Obstacle.sphere([3, 0, 0], 0.5)
        assert q_i_max_bound(spec, obs, 0.0) < 0

    def test_target_inside_rejected(self):
        spec = NavSpec("psi", 4, [3.0, 0, 0])
        obs = Obstacle.sphere([3, 0, 0], 0.5)
        with pytest.raises(FieldError):
            q_i_max_bound(spec, obs, 0.1)

    def test_cylinder_reduces_to_spherical_form(self):
        # with the axis point at the target's perpendicular foot the
        # cylinder bound equals the sphere formula on the radial distance
        spec = NavSpec("psi", 4, [0, 0, 0])
        cyl = Obstacle.full_cylinder([2.0, 0, 0], [0, 0, 1], 0.5)
        eps = 0.2
        d = 2.0  # radial distance from target to the axis
        expect = d * (np.sqrt(eps + 0.25) - d)
        assert q_i_max_bound(spec, cyl, eps) == pytest.approx(expect)


class TestEpsilonBounds:
    def test_single_sphere(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([3, 0, 0], 1.0)])
        spec = NavSpec("psi", 4, [0, 0, 0])
        eb = epsilon_bounds(spec, w, ShellSamplingConfig(n_samples=2000))
        assert eb.per_obstacle[0]["eps0_prime"] == pytest.approx(8.0)
        assert eb.eps0 <= 8.0
        assert eb.N_of_eps >= 1

    def test_intersecting_pair_entries(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([2.0, 0, 0], 0.8),
                               Obstacle.sphere([2.9, 0, 0], 0.8)])
        spec = NavSpec("psi", 4, [-1, 0, 0])
        eb = epsilon_bounds(spec, w, ShellSamplingConfig(n_samples=2000))
        assert len(eb.per_pair) == 1
        pair = eb.per_pair[0]
        assert (pair["i"], pair["j"]) == (0, 1)
        assert pair["eps0l_prime"] == pytest.approx(
            min(nf.beta(w.obstacles[0], spec.target),
                nf.beta(w.obstacles[1], spec.target)))

    def test_n_of_eps_empty_workspace(self):
        w = nf.Workspace(5.0)
        spec = NavSpec("psi", 4, [1.0, 0, 0])
        # boundary term only: ceil((1/2eps) (r0 + |pd|) 2 r0)
        for eps in (0.5, 1.0, 2.0):
            expect = int(np.ceil((5.0 + 1.0) * 10.0 / (2.0 * eps)))
            assert n_of_eps(spec, w, eps) == expect

    def test_n_of_eps_monotone_in_eps(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([2, 0, 0], 0.5)])
        spec = NavSpec("psi", 4, [0, 0, 0])
        vals = [n_of_eps(spec, w, e) for e in (0.1, 0.2, 0.5, 1.0, 2.0)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_n_of_eps_sum_scaling(self):
        # duplicating every obstacle at most doubles the sum (+ ceiling)
        obs = [Obstacle.sphere([2, 0, 0], 0.5),
               Obstacle.sphere([-1, 1, 0], 0.4)]
        w1 = nf.Workspace(5.0, obs)
        w2 = nf.Workspace(5.0, obs + obs)
        spec = NavSpec("psi", 4, [0, 0, 0])
        n1 = n_of_eps(spec, w1, 0.3)
        n2 = n_of_eps(spec, w2, 0.3)
        assert n2 <= 2 * n1 + 1

    def test_disjoint_boxes_sample_empty(self):
        # pair-shell sampling over disjoint bounding boxes yields nothing
        from navfield.analysis import _sample_shell
        w = nf.Workspace(5.0, [Obstacle.sphere([-3, 0, 0], 0.5),
                               Obstacle.sphere([3, 0, 0], 0.5)])
        pts = _sample_shell(w, [0, 1], [0.01, 0.01], ShellSamplingConfig(500))
        assert len(pts) == 0

    def test_empty_shell_error(self, monkeypatch):
        w = nf.Workspace(5.0, [Obstacle.sphere([2, 0, 0], 0.5)])
        spec = NavSpec("psi", 4, [0, 0, 0])
        monkeypatch.setattr(analysis, "_sample_shell",
                            lambda *a, **k: np.zeros((0, 3)))
        with pytest.raises(FieldError, match="shell"):
            epsilon_bounds(spec, w, ShellSamplingConfig(n_samples=500))


class TestCriticalPoints:
    def test_empty_workspace_only_target(self):
        w = nf.Workspace(5.0)
        spec = NavSpec("psi", 2, [1.0, 0.5, 0.0])
        rep = find_critical_points(spec, w, n_starts=60, seed=1)
        assert len(rep.points) == 1
        p = rep.points[0]
        assert p.cls == "minimum" and p.region == "target"
        npt.assert_allclose(p.x, spec.target)

    def test_sphere_shadow_saddle(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([1.5, 0, 0], 0.6)])
        spec = NavSpec("psi", 8, [0, 0, 0])
        rep = find_critical_points(spec, w, n_starts=200, seed=2)
        saddles = [p for p in rep.points if p.cls == "saddle"]
        assert saddles
        # the shadow saddle sits behind the sphere on the target-center axis
        on_axis = [p for p in saddles
                   if abs(p.x[1]) < 1e-6 and abs(p.x[2]) < 1e-6
                   and p.x[0] > 2.1]
        assert on_axis
        # grid oracle: gradient x-component changes sign on the axis
        xs = np.linspace(2.15, 4.5, 200)
        gx = [field.eval(spec, w, [x, 0, 0]).gradient[0] for x in xs]
        assert min(gx) < 0 < max(gx)
        assert any(np.sign(gx[i]) != np.sign(gx[i + 1])
                   for i in range(len(gx) - 1))

    def test_saddle_eigenvalues_mixed_sign(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([1.5, 0, 0], 0.6)])
        spec = NavSpec("psi", 8, [0, 0, 0])
        rep = find_critical_points(spec, w, n_starts=200, seed=2)
        for p in rep.points:
            if p.cls == "saddle":
                assert p.eigenvalues[0] < 0 < p.eigenvalues[-1]

    def test_deterministic_given_seed(self):
        w = nf.Workspace(5.0, [Obstacle.sphere([1.5, 0, 0], 0.6)])
        spec = NavSpec("psi", 8, [0, 0, 0])
        r1 = find_critical_points(spec, w, n_starts=100, seed=7)
        r2 = find_critical_points(spec, w, n_starts=100, seed=7)
        assert len(r1.points) == len(r2.points)
        for p1, p2 in zip(r1.points, r2.points):
            npt.assert_array_equal(p1.x, p2.x)

    def test_report_serialization(self):
        w = nf.Workspace(5.0)
        spec = NavSpec("psi", 2, [1, 0, 0])
        rep = find_critical_points(spec, w, n_starts=40, seed=0)
        doc = rep.to_dict()
        assert doc["points"][0]["class"] == "minimum"


class TestSweep:
    def test_empty_workspace_all_clean(self):
        w = nf.Workspace(5.0)
        spec = NavSpec("psi", 2, [1.0, 0, 0])
        rows, best = no_local_minima_sweep(spec, w, k_range=range(1, 4),
                                           n_starts=40, seed=0)
        assert rows == [(1, 0), (2, 0), (3, 0)]
        assert best == 1

    def test_pinch_scene_counts_weakly_decreasing_tail(self):
        # two spheres pinching the target approach; spurious minima die
        # out as k grows (dense-grid oracle below confirms the k=2 minimum)
        w = nf.Workspace(5.0, [Obstacle.sphere([1.2, 0.8, 0], 0.7),
                               Obstacle.sphere([1.2, -0.8, 0], 0.7)])
        spec = NavSpec("psi", 2, [0, 0, 0])
        rows, best = no_local_minima_sweep(spec, w, k_range=(2, 6, 12),
                                           n_starts=150, seed=3)
        counts = dict(rows)
        assert counts[12] == 0
        assert counts[2] >= counts[12]
