"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_backends.py [--repeat 3]

Prints one line per (kernel, backend) with the best of ``repeat`` timings and
the speed-up of the compiled core.
"""
import argparse
import math
import time

import numpy as np

from robomarl.arena import default_arena
from robomarl.bench import physics_throughput
from robomarl.kernels import available_backends, load_backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        n = fn()
        times.append((time.perf_counter() - t0) / n)
    return min(times)


def cases(core, arena, rng):
    grid = np.ascontiguousarray(arena.grid, dtype=np.uint8)
    free = np.argwhere(grid == 0)
    pairs = [tuple(free[i]) + tuple(free[j]) for i, j in rng.integers(len(free), size=(20, 2))]
    angles = np.linspace(-0.75 * math.pi, 0.75 * math.pi, 32)
    circles = np.array([[4.0, 2.5, 0.3], [6.0, 1.0, 0.3]])

    def astar():
        for r0, c0, r1, c1 in pairs:
            core.astar(grid, int(r0), int(c0), int(r1), int(c1))
        return len(pairs)

    def ray_cast():
        for _ in range(200):
            core.ray_cast(1.0, 1.0, angles, 5.0, arena.rects, arena.length, arena.width, circles)
        return 200

    def segment_clear():
        for _ in range(2000):
            core.segment_clear(0.5, 0.5, 7.5, 4.5, arena.rects)
        return 2000

    samples = np.ascontiguousarray(rng.uniform(0.0, 5.0, size=(180, 2)))
    xs, ys = samples[:, 0].copy(), samples[:, 1].copy()

    def points_free():
        for _ in range(50):
            core.points_free(xs, ys, arena.rects, arena.length, arena.width, 0.3)
        return 50

    def kmeans():
        for _ in range(20):
            core.kmeans_lloyd(samples, 4, 0, 50)
        return 20

    return {"astar": astar, "ray_cast (32 rays)": ray_cast, "segment_clear": segment_clear,
            "points_free (180)": points_free, "kmeans (180, k=4)": kmeans}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    arena = default_arena()
    backends = available_backends()
    results = {}
    for name in backends:
        core = load_backend(name)
        ticks = 20_000 if name == "compiled" else 2_000
        results[("world_tick", name)] = 1.0 / max(physics_throughput(name, ticks) for _ in range(args.repeat))
        for kernel, fn in cases(core, arena, np.random.default_rng(0)).items():
            results[(kernel, name)] = best_of(fn, args.repeat)
    print(f"{'kernel':<20}{'backend':<10}{'us/call':>12}{'speed-up':>10}")
    for kernel in dict.fromkeys(k for k, _ in results):
        for name in backends:
            t = results[(kernel, name)]
            ratio = results.get((kernel, "python"), t) / t
            print(f"{kernel:<20}{name:<10}{t * 1e6:>12.2f}{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
