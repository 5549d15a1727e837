"""Headless physics throughput measurement."""
import time

import numpy as np

from .arena import default_arena
from .dynamics import DT, DynamicsContext
from .kernels import load_backend


def physics_throughput(backend: str = "compiled", n_ticks: int = 20_000, seed: int = 0,
                       arena=None) -> float:
    """World ticks per second for four robots under random commands."""
    core = load_backend(backend)
    arena = arena or default_arena()
    rng = np.random.default_rng(seed)
    params = np.ascontiguousarray(np.tile(DynamicsContext().param_row(), (4, 1)))
    bodies = np.zeros((4, 18))
    for i, b in enumerate(arena.birth_areas):
        bodies[i, :3] = (b.cx, b.cy, 0.0 if i < 2 else np.pi)
    movable = np.ones(4, dtype=np.uint8)
    cmds = np.ascontiguousarray(rng.uniform(-2.0, 2.0, size=(4, 3)))
    start = time.perf_counter()
    for t in range(n_ticks):
        if t % 50 == 0:
            cmds[:] = rng.uniform(-2.0, 2.0, size=(4, 3))
        core.world_tick(bodies, cmds, params, movable, arena.rects, arena.length, arena.width, DT)
    return n_ticks / (time.perf_counter() - start)
