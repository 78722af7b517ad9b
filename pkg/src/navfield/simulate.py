"""Damped second-order point-mass dynamics on the negative field gradient.

The control law is ``x'' = -grad(potential)(x) - c x'`` started from rest.
Outcomes:

* ``converged``: within ``conv_pos_tol`` of the target at speed below
  ``conv_speed_tol``.
* ``local_minimum``: speed and gradient stayed below tolerance away from
  the target for ``stagnation_steps`` consecutive steps (slow plateau
  traversal does not trip this; the gradient check filters it).
* ``timeout``: ``t_max`` reached.
* ``collision_numerical``: some repulsion term went non-positive during
  integration.  A navigation-function trajectory cannot legitimately reach
  the boundary, so this always signals a too-large ``dt``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._backend import USING_NUMBA
from .field import NavSpec, eval as field_eval
from .geometry import as_vec3
from .scene import SimConfig, Workspace

OUTCOME_NAMES = {
    _kernels.OUT_CONVERGED: "converged",
    _kernels.OUT_LOCAL_MIN: "local_minimum",
    _kernels.OUT_TIMEOUT: "timeout",
    _kernels.OUT_COLLISION: "collision_numerical",
}

SAMPLE_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az",
                  "field")

_INTEGRATOR_CODES = {"semi_implicit_euler": _kernels.INT_SEMI_IMPLICIT,
                     "rk4": _kernels.INT_RK4}


class SimulationError(ValueError):
    """Invalid simulation request (e.g. start outside free space)."""


@dataclass
class Trajectory:
    """Time-stamped state samples plus the run outcome."""

    samples: np.ndarray  # (n, 11) columns per SAMPLE_COLUMNS
    outcome: str
    start: np.ndarray
    max_speed: float
    max_accel: float
    t_end: float

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.samples[:, 1:4]

    @property
    def v(self) -> np.ndarray:
        return self.samples[:, 4:7]

    @property
    def a(self) -> np.ndarray:
        return self.samples[:, 7:10]

    @property
    def field_value(self) -> np.ndarray:
        return self.samples[:, 10]

    @property
    def converged(self) -> bool:
        return self.outcome == "converged"

    def energy(self) -> np.ndarray:
        """Total energy 0.5|v|^2 + potential at each sample."""
        return 0.5 * np.sum(self.v ** 2, axis=1) + self.field_value

    def to_text(self) -> str:
        """Tabular dump: one row per sample, stable column order."""
        lines = ["# " + " ".join(SAMPLE_COLUMNS)]
        for row in self.samples:
            lines.append(" ".join(repr(float(c)) for c in row))
        return "\n".join(lines) + "\n"


def _run_kernel(spec, workspace, cfg, start):
    packed = workspace.packed()
    n_steps = int(np.ceil(cfg.t_max / cfg.dt))
    n_rows = n_steps // cfg.sample_stride + 4
    out = np.empty((n_rows, 11))
    outcome, rows, max_speed, max_accel, t_end = _kernels.simulate_kernel(
        start, spec.target, spec.k, spec.code,
        packed.kinds, packed.params, packed.gstart, packed.gp,
        cfg.damping_c, cfg.dt, cfg.t_max, cfg.conv_pos_tol,
        cfg.conv_speed_tol, cfg.grad_tol, cfg.stagnation_steps,
        _INTEGRATOR_CODES[cfg.integrator], cfg.sample_stride, out)
    return outcome, out[:rows].copy(), max_speed, max_accel, t_end


def simulate(spec: NavSpec, workspace: Workspace, cfg: SimConfig,
             start) -> Trajectory:
    """Integrate one trajectory from rest at ``start``."""
    start = as_vec3(start, "start")
    # probe with psi: fhat raises on the boundary instead of flagging
    probe_spec = spec.with_potential("psi") if spec.potential == "fhat" else spec
    probe = field_eval(probe_spec, workspace, start)
    if probe.on_boundary or probe.inside_obstacle:
        raise SimulationError(
            f"start {start.tolist()} is not in the open free space")
    outcome, samples, max_speed, max_accel, t_end = _run_kernel(
        spec, workspace, cfg, start)
    if outcome == _kernels.OUT_START_INVALID:
        raise SimulationError(
            f"start {start.tolist()} is not in the open free space")
    return Trajectory(samples=samples, outcome=OUTCOME_NAMES[outcome],
                      start=start, max_speed=float(max_speed),
                      max_accel=float(max_accel), t_end=float(t_end))


@dataclass
class BatchSummary:
    """Aggregate results of a multi-start batch."""

    outcome_counts: dict
    max_speed: float
    max_accel: float
    time_to_converge: list  # per start; None when not converged

    @property
    def all_converged(self) -> bool:
        n = sum(self.outcome_counts.values())
        return self.outcome_counts.get("converged", 0) == n and n > 0

    def to_dict(self) -> dict:
        return {"outcome_counts": dict(self.outcome_counts),
                "max_speed": self.max_speed, "max_accel": self.max_accel,
                "time_to_converge": self.time_to_converge}


def simulate_batch(spec: NavSpec, workspace: Workspace, cfg: SimConfig,
                   starts, threads: int = 1):
    """Independent trajectories from each start; returns (list, summary).

    Per-start errors (start outside free space) are isolated into
    ``collision_numerical``-style outcomes rather than raised; genuinely
    invalid inputs surface in the summary.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != 3:
        raise SimulationError(f"starts must be (N, 3), got {starts.shape}")

    def run(i):
        outcome, samples, ms, ma, t_end = _run_kernel(spec, workspace, cfg,
                                                      starts[i])
        if outcome == _kernels.OUT_START_INVALID:
            return Trajectory(samples=samples, outcome="start_invalid",
                              start=starts[i], max_speed=0.0, max_accel=0.0,
                              t_end=0.0)
        return Trajectory(samples=samples, outcome=OUTCOME_NAMES[outcome],
                          start=starts[i], max_speed=float(ms),
                          max_accel=float(ma), t_end=float(t_end))

    workspace.packed()  # build once before forking threads
    if threads > 1 and USING_NUMBA and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(run, range(len(starts))))
    else:
        trajectories = [run(i) for i in range(len(starts))]

    counts: dict = {}
    ttc = []
    max_speed = 0.0
    max_accel = 0.0
    for tr in trajectories:
        counts[tr.outcome] = counts.get(tr.outcome, 0) + 1
        ttc.append(tr.t_end if tr.converged else None)
        max_speed = max(max_speed, tr.max_speed)
        max_accel = max(max_accel, tr.max_accel)
    summary = BatchSummary(outcome_counts=counts, max_speed=max_speed,
                           max_accel=max_accel, time_to_converge=ttc)
    return trajectories, summary
