"""Command-line interface: validate, simulate, field, critical, transform.

Every command that writes outputs drops a ``manifest.json`` recording the
command, scene hash, seed, and effective parameter values; reruns from the
same manifest inputs are bit-identical on a fixed platform.

Exit codes: 0 success; 1 analysis-negative (invalid scene, local minima
found, clearance violation); 2 input error; 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .field import FieldError, eval_batch
from .scene import Scene, SceneError, serialize_scene, validate
from .simulate import simulate_batch
from .analysis import (ShellSamplingConfig, epsilon_bounds,
                       find_critical_points)
from .transform import (FULL_ENCLOSURE, MINIMAL_EVOLUTE, TransformError,
                        transform)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_IO = 3


def _read_scene(path: str) -> tuple:
    with open(path, "rb") as f:
        content = f.read()
    from .scene import parse_scene
    scene = parse_scene(content)
    digest = hashlib.sha256(content).hexdigest()
    return scene, digest


def _apply_overrides(scene: Scene, args) -> Scene:
    nav = scene.nav
    if getattr(args, "k", None) is not None:
        nav = nav.with_k(args.k)
    if getattr(args, "potential", None) is not None:
        nav = nav.with_potential(args.potential)
    sim = scene.sim
    patches = {}
    if getattr(args, "c", None) is not None:
        patches["damping_c"] = args.c
    if getattr(args, "dt", None) is not None:
        patches["dt"] = args.dt
    if getattr(args, "t_max", None) is not None:
        patches["t_max"] = args.t_max
    if patches:
        sim = replace(sim, **patches)
    starts = scene.starts
    if getattr(args, "starts", None) is not None:
        starts = np.loadtxt(args.starts, ndmin=2)
    return Scene(workspace=scene.workspace, nav=nav, sim=sim, starts=starts,
                 warnings=scene.warnings)


def _write_manifest(out_dir: Path, command: str, scene_path: str,
                    digest: str, seed: int, overrides: dict):
    manifest = {
        "command": command,
        "scene_path": str(scene_path),
        "scene_sha256": digest,
        "seed": seed,
        "overrides": overrides,
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)


def _effective_overrides(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def cmd_validate(args) -> int:
    scene, digest = _read_scene(args.scene)
    report = validate(scene.workspace, scene.nav)
    text = report.summary()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validation.txt").write_text(text + "\n")
        _write_manifest(out, "validate", args.scene, digest, args.seed, {})
    return EXIT_OK if report.valid else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    scene, digest = _read_scene(args.scene)
    scene = _apply_overrides(scene, args)
    report = validate(scene.workspace, scene.nav)
    if not report.valid:
        print(report.summary(), file=sys.stderr)
        print("scene invalid; aborting", file=sys.stderr)
        return EXIT_INPUT
    if len(scene.starts) == 0:
        print("scene has no start positions", file=sys.stderr)
        return EXIT_INPUT
    threads = args.threads or int(os.environ.get("NAVFIELD_THREADS", "1"))
    trajectories, summary = simulate_batch(scene.nav, scene.workspace,
                                           scene.sim, scene.starts,
                                           threads=threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, tr in enumerate(trajectories):
        (out / f"trajectory_{i:03d}.txt").write_text(tr.to_text())
    with open(out / "summary.json", "w") as f:
        json.dump(summary.to_dict(), f, indent=2)
    _write_manifest(out, "simulate", args.scene, digest, args.seed,
                    _effective_overrides(args, ("k", "c", "dt", "t_max",
                                                "potential", "starts")))
    print(f"outcomes: {summary.outcome_counts}; max speed "
          f"{summary.max_speed:.4f} m/s; max accel {summary.max_accel:.4f} "
          f"m/s^2")
    return EXIT_OK if summary.all_converged else EXIT_NEGATIVE


def _grid_points(gridspec: str, r0: float) -> np.ndarray:
    try:
        parts = [int(p) for p in gridspec.split(",")]
        nx, ny, nz = (parts + parts[:1] * 3)[:3] if len(parts) != 3 else parts
    except ValueError:
        raise SceneError(f"bad grid spec {gridspec!r}; expected NX,NY,NZ")
    axes = [np.linspace(-r0, r0, n) if n > 1 else np.zeros(1)
            for n in (nx, ny, nz)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def cmd_field(args) -> int:
    scene, digest = _read_scene(args.scene)
    scene = _apply_overrides(scene, args)
    if args.points:
        pts = np.loadtxt(args.points, ndmin=2)
    elif args.grid:
        pts = _grid_points(args.grid, scene.workspace.outer_radius)
    else:
        print("need --grid or --points", file=sys.stderr)
        return EXIT_INPUT
    vals, grads, status = eval_batch(scene.nav, scene.workspace, pts)
    lines = ["# x y z value gx gy gz inside"]
    for p, v, g, st in zip(pts, vals, grads, status):
        lines.append(" ".join(repr(float(c)) for c in
                              (*p, v, *g)) + f" {int(st == 2)}")
    text = "\n".join(lines) + "\n"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "field.txt").write_text(text)
    _write_manifest(out, "field", args.scene, digest, args.seed,
                    _effective_overrides(args, ("k", "potential", "grid",
                                                "points")))
    print(f"wrote {len(pts)} field rows to {out / 'field.txt'}")
    return EXIT_OK


def cmd_critical(args) -> int:
    scene, digest = _read_scene(args.scene)
    scene = _apply_overrides(scene, args)
    report = validate(scene.workspace, scene.nav)
    if not report.valid:
        print(report.summary(), file=sys.stderr)
        return EXIT_INPUT
    cp = find_critical_points(scene.nav, scene.workspace,
                              n_starts=args.n_starts, seed=args.seed)
    doc = cp.to_dict()
    try:
        eb = epsilon_bounds(scene.nav, scene.workspace,
                            ShellSamplingConfig(seed=args.seed))
        doc["epsilon_bounds"] = {
            "per_obstacle": eb.per_obstacle, "per_pair": eb.per_pair,
            "eps0": eb.eps0, "N_of_eps": eb.N_of_eps}
    except FieldError as e:
        doc["epsilon_bounds"] = {"error": str(e)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "critical.json", "w") as f:
        json.dump(doc, f, indent=2)
    _write_manifest(out, "critical", args.scene, digest, args.seed,
                    _effective_overrides(args, ("k", "potential", "n_starts")))
    n_spur = len(cp.spurious_minima())
    print(f"{len(cp.points)} critical points; {n_spur} spurious minima")
    for p in cp.points:
        print(f"  {p.cls:10s} {p.region:18s} x={np.round(p.x, 5).tolist()}")
    return EXIT_OK if n_spur == 0 else EXIT_NEGATIVE


def cmd_transform(args) -> int:
    scene, digest = _read_scene(args.scene)
    mode = FULL_ENCLOSURE if args.mode == "full" else MINIMAL_EVOLUTE
    try:
        result = transform(scene.workspace, args.radius, mode=mode,
                           nav=scene.nav, starts=scene.starts)
    except TransformError as e:
        print(f"transform failed: {e}", file=sys.stderr)
        return EXIT_NEGATIVE
    out_scene = Scene(workspace=result.point_workspace, nav=scene.nav,
                      sim=scene.sim, starts=scene.starts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transformed_scene.json").write_text(serialize_scene(out_scene))
    info = {
        "mode": args.mode, "robot_radius": args.radius,
        "joint_expansions": result.joint_expansions,
        "p_fail_surface": result.p_fail_surface,
        "p_fail_volume": result.p_fail_volume,
        "warnings": result.warnings,
    }
    with open(out / "transform.json", "w") as f:
        json.dump(info, f, indent=2)
    _write_manifest(out, "transform", args.scene, digest, args.seed,
                    {"radius": args.radius, "mode": args.mode})
    print(f"wrote transformed scene to {out / 'transformed_scene.json'}")
    for w in result.warnings:
        print(f"warning: {w}")
    ok = result.validation is None or result.validation.valid
    return EXIT_OK if ok else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="navfield",
        description="Navigation functions over 3-D spherical workspaces")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--scene", required=True, help="scene JSON path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: NAVFIELD_THREADS or 1)")
        if out_required:
            sp.add_argument("--out", required=True, help="output directory")
        else:
            sp.add_argument("--out", default=None, help="output directory")

    sp = sub.add_parser("validate", help="classify obstacle pairs, check rules")
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="batch trajectories from scene starts")
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--c", type=float, default=None, help="damping override")
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--t-max", dest="t_max", type=float, default=None)
    sp.add_argument("--potential", choices=("phi", "psi", "fhat"), default=None)
    sp.add_argument("--starts", default=None,
                    help="text file of start rows overriding the scene's")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("field", help="sample the potential on a grid or points")
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--potential", choices=("phi", "psi", "fhat"), default=None)
    sp.add_argument("--grid", default=None, help="NX,NY,NZ over the bounding cube")
    sp.add_argument("--points", default=None, help="text file of x y z rows")
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("critical", help="multi-start critical point search")
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--potential", choices=("phi", "psi", "fhat"), default=None)
    sp.add_argument("--n-starts", dest="n_starts", type=int, default=500)
    sp.set_defaults(func=cmd_critical)

    sp = sub.add_parser("transform", help="spherical-robot to point-robot scene")
    common(sp)
    sp.add_argument("--radius", type=float, required=True, help="robot radius R")
    sp.add_argument("--mode", choices=("full", "minimal"), default="minimal")
    sp.set_defaults(func=cmd_transform)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SceneError, FieldError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
