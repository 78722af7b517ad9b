"""Damped gradient-descent trajectories."""

import numpy as np
import numpy.testing as npt
import pytest

import navfield as nf
from navfield.field import NavSpec
from navfield.geometry import Obstacle
from navfield.scene import SimConfig, Workspace
from navfield.simulate import (SimulationError, simulate, simulate_batch)


@pytest.fixture
def empty_ws():
    return Workspace(5.0)


@pytest.fixture
def spec():
    return NavSpec("psi", 2, [1.5, 0.0, 0.0])


class TestSingle:
    def test_start_at_target_converges_immediately(self, empty_ws, spec):
        tr = simulate(spec, empty_ws, SimConfig(), spec.target)
        assert tr.converged and tr.t_end == 0.0

    def test_empty_workspace_converges_radially(self, empty_ws, spec):
        start = np.array([-3.0, 2.0, 1.0])
        tr = simulate(spec, empty_ws, SimConfig(), start)
        assert tr.converged
        # central field: motion stays in the plane spanned by the initial
        # offset and the (radial) gradient through the target
        d0 = start - spec.target
        n = np.cross(d0, [0.0, 0.0, 1.0])
        n = np.cross(d0, spec.target - 0.0) if np.linalg.norm(n) < 1e-9 else n
        normal = np.cross(d0, tr.x[len(tr.x) // 2] - spec.target)
        for x in tr.x[::20]:
            assert abs(np.dot(x - spec.target, normal)) < 1e-6

    def test_start_outside_free_space_rejected(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([-2, 0, 0], 0.5)])
        with pytest.raises(SimulationError):
            simulate(spec, w, SimConfig(), [-2, 0, 0])
        with pytest.raises(SimulationError):
            simulate(spec, w, SimConfig(), [10, 0, 0])

    def test_collision_outcome_for_coarse_dt(self):
        # a huge dt + low damping steps across the thin repulsion layer
        # into the obstacle: flagged as numerical, never silently accepted
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        spec = NavSpec("psi", 8, [2.0, 0.0, 0.0])
        cfg = SimConfig(dt=0.5, t_max=300.0, damping_c=0.001)
        tr = simulate(spec, w, cfg, [-3.0, 0.005, 0.0])
        assert tr.outcome == "collision_numerical"
        assert np.min(np.linalg.norm(tr.x, axis=1)) < 1.0  # inside recorded

    def test_trajectory_samples_structure(self, empty_ws, spec):
        cfg = SimConfig(sample_stride=7)
        tr = simulate(spec, empty_ws, cfg, [3.0, 0, 0])
        assert tr.samples.shape[1] == 11
        npt.assert_allclose(np.diff(tr.t)[:-1], 7e-3, rtol=1e-9)
        assert tr.samples[0, 0] == 0.0

    def test_converged_runs_stay_in_free_space(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        tr = simulate(spec, w, SimConfig(), [-3.0, 0.5, 0.0])
        assert tr.converged
        for x in tr.x:
            assert nf.beta(w.obstacles[0], x) > 0
            assert w.boundary_beta(x) > 0

    def test_energy_dissipation_rk4(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        cfg = SimConfig(integrator="rk4", dt=1e-3)
        tr = simulate(spec, w, cfg, [-3.0, 0.5, 0.0])
        E = tr.energy()
        tol = 1e-6 * E[0] + 1e-9
        assert np.all(np.diff(E) <= tol)

    def test_energy_dissipation_semi_implicit(self, spec):
        # first-order integrator: allow its larger per-step tolerance
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        tr = simulate(spec, w, SimConfig(), [-3.0, 0.5, 0.0])
        E = tr.energy()
        assert np.all(np.diff(E) <= 1e-4 * E[0] + 1e-7)

    def test_determinism(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        tr1 = simulate(spec, w, SimConfig(), [-3.0, 0.5, 0.0])
        tr2 = simulate(spec, w, SimConfig(), [-3.0, 0.5, 0.0])
        npt.assert_array_equal(tr1.samples, tr2.samples)
        assert tr1.outcome == tr2.outcome

    def test_dt_refinement_stable_endpoint(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        cfg1 = SimConfig(dt=1e-3)
        cfg2 = SimConfig(dt=5e-4)
        tr1 = simulate(spec, w, cfg1, [-3.0, 0.5, 0.0])
        tr2 = simulate(spec, w, cfg2, [-3.0, 0.5, 0.0])
        assert tr1.converged and tr2.converged
        assert np.linalg.norm(tr1.x[-1] - tr2.x[-1]) <= cfg1.conv_pos_tol

    def test_rk4_matches_semi_implicit_loosely(self, empty_ws, spec):
        tr1 = simulate(spec, empty_ws, SimConfig(), [3.0, 1.0, 0.0])
        tr2 = simulate(spec, empty_ws, SimConfig(integrator="rk4"),
                       [3.0, 1.0, 0.0])
        assert tr1.converged and tr2.converged
        assert abs(tr1.t_end - tr2.t_end) < 1.0

    def test_to_text_round_trip(self, empty_ws, spec):
        tr = simulate(spec, empty_ws, SimConfig(), [3.0, 0, 0])
        text = tr.to_text()
        rows = np.loadtxt(text.splitlines())
        npt.assert_array_equal(rows, tr.samples)


class TestBatch:
    def test_batch_of_one_equals_single(self, empty_ws, spec):
        tr = simulate(spec, empty_ws, SimConfig(), [3.0, 0, 0])
        trajs, summary = simulate_batch(spec, empty_ws, SimConfig(),
                                        [[3.0, 0, 0]])
        npt.assert_array_equal(trajs[0].samples, tr.samples)
        assert summary.outcome_counts == {"converged": 1}

    def test_summary_maxima(self, empty_ws, spec):
        starts = [[3.0, 0, 0], [0, 3.0, 0], [0, 0, 4.0]]
        trajs, summary = simulate_batch(spec, empty_ws, SimConfig(), starts)
        assert summary.max_speed == pytest.approx(
            max(t.max_speed for t in trajs))
        assert summary.max_accel == pytest.approx(
            max(t.max_accel for t in trajs))
        assert len(summary.time_to_converge) == 3

    def test_invalid_start_isolated(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([-2, 0, 0], 0.5)])
        trajs, summary = simulate_batch(spec, w, SimConfig(),
                                        [[3.0, 0, 0], [-2.0, 0, 0]])
        assert trajs[0].converged
        assert trajs[1].outcome == "start_invalid"

    def test_threaded_matches_serial(self, spec):
        w = Workspace(5.0, [Obstacle.sphere([0, 0, 0], 1.0)])
        starts = [[3.0, 0.5, 0], [-3.0, 0.5, 0], [0, 3.0, 0.5], [0, -3.0, 1.0]]
        t1, s1 = simulate_batch(spec, w, SimConfig(), starts, threads=1)
        t4, s4 = simulate_batch(spec, w, SimConfig(), starts, threads=4)
        assert s1.outcome_counts == s4.outcome_counts
        for a, b in zip(t1, t4):
            npt.assert_array_equal(a.samples, b.samples)

    def test_random_starts_all_converge_simple_scene(self, rng):
        # measure-zero stable manifolds are not hit from random starts
        w = Workspace(5.0, [Obstacle.sphere([1.5, 0, 0], 0.6)])
        spec = NavSpec("psi", 8, [0, 0, 0])
        starts = []
        while len(starts) < 20:
            x = rng.uniform(-4, 4, 3)
            if np.linalg.norm(x) < 4.2 and nf.beta(w.obstacles[0], x) > 0.2:
                starts.append(x)
        _, summary = simulate_batch(spec, w, SimConfig(), starts)
        assert summary.outcome_counts == {"converged": 20}
