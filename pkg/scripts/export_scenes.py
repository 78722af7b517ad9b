#!/usr/bin/env python3
"""Regenerate the JSON scene files under scenes/ from the builders."""

from pathlib import Path

from navfield import scenes
from navfield.scene import serialize_scene

OUT = Path(__file__).resolve().parent.parent / "scenes"


def main():
    OUT.mkdir(exist_ok=True)
    exports = {
        "truss.json": scenes.truss_scene(k=40, n_starts=100),
        "truss_k10.json": scenes.truss_scene(k=10, n_starts=100),
        "truss_merged_k10.json": scenes.truss_scene(k=10, merged=True,
                                                    n_starts=100),
        "tetrahedron.json": scenes.tetrahedron_scene(k=5, n_starts=100),
        "three_cylinders.json": scenes.perpendicular_cylinders_scene(
            k=5, n_starts=100),
        "plateau.json": scenes.plateau_scene(k=40),
        "random_0.json": scenes.random_scene(seed=300, n_obstacles=6,
                                             n_intersecting_pairs=1,
                                             merge_pairs=True,
                                             full_cylinders=1, k=10),
    }
    for name, scene in exports.items():
        (OUT / name).write_text(serialize_scene(scene))
        print(f"wrote scenes/{name}")


if __name__ == "__main__":
    main()
