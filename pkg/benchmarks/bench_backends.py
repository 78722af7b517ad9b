#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the same field-evaluation and trajectory workloads in two child
processes, one per backend (selected via NAVFIELD_NUMBA), and prints a
comparison table.  The numpy fallback executes the identical kernel source
as plain Python, so expect orders of magnitude; the point is a correctness
cross-check with a cost signal, not a horse race.

Usage: python benchmarks/bench_backends.py [--points 20000] [--sim-t 2.0]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, os, time
import numpy as np
import navfield as nf
from navfield import field
from navfield._backend import backend_name
from navfield.scene import SimConfig
from navfield.simulate import simulate

n_points = int(os.environ["BENCH_POINTS"])
sim_t = float(os.environ["BENCH_SIM_T"])

rng = np.random.default_rng(0)
obstacles = [nf.Obstacle.sphere(rng.uniform(-2.5, 2.5, 3), 0.4)
             for _ in range(6)]
obstacles.append(nf.Obstacle.capped_cylinder([-2, -2, -1], [2, 2, 1], 0.3))
obstacles.append(nf.MergedObstacle(
    (nf.Obstacle.sphere([0.5, 2.8, 0], 0.6),
     nf.Obstacle.sphere([1.3, 3.1, 0], 0.6)), 2.0))
w = nf.Workspace(5.0, obstacles)
spec = nf.NavSpec("psi", 40, [3.4, 0.0, 0.0])

pts = rng.uniform(-1.5, 1.5, (n_points, 3))
field.eval_batch(spec, w, pts[:10])  # warm-up / JIT compile
t0 = time.perf_counter()
vals, grads, status = field.eval_batch(spec, w, pts)
t_eval = time.perf_counter() - t0

cfg = SimConfig(t_max=sim_t)
simulate(spec, w, SimConfig(t_max=2e-3), [-3.0, 0.5, 0.2])  # warm-up
t0 = time.perf_counter()
tr = simulate(spec, w, cfg, [-3.0, 0.5, 0.2])
t_sim = time.perf_counter() - t0

print(json.dumps({
    "backend": backend_name(),
    "eval_seconds": t_eval,
    "eval_per_point_us": 1e6 * t_eval / n_points,
    "checksum": float(np.nansum(vals)),
    "sim_seconds": t_sim,
    "sim_steps": int(round(sim_t / cfg.dt)),
}))
"""


def run(flag: str, points: int, sim_t: float) -> dict:
    env = dict(os.environ, NAVFIELD_NUMBA=flag,
               BENCH_POINTS=str(points), BENCH_SIM_T=str(sim_t))
    r = subprocess.run([sys.executable, "-c", WORKLOAD], env=env,
                       capture_output=True, text=True)
    if r.returncode != 0:
        sys.stderr.write(r.stderr)
        raise SystemExit(1)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--sim-t", type=float, default=2.0)
    args = ap.parse_args()

    results = [run("1", args.points, args.sim_t),
               run("0", args.points, args.sim_t)]
    print(f"{'backend':>8} {'eval us/pt':>12} {'sim s':>10} {'checksum':>18}")
    for r in results:
        print(f"{r['backend']:>8} {r['eval_per_point_us']:>12.3f} "
              f"{r['sim_seconds']:>10.3f} {r['checksum']:>18.10f}")
    if abs(results[0]["checksum"] - results[1]["checksum"]) > 1e-9 * max(
            abs(results[0]["checksum"]), 1.0):
        print("WARNING: backend checksums disagree")
    speedup = results[1]["eval_per_point_us"] / results[0]["eval_per_point_us"]
    print(f"numba speedup on field evaluation: {speedup:.0f}x")


if __name__ == "__main__":
    main()
