"""Candidate firing points, grid path planning and path following."""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .arena import ROBOT_INFLATION, Arena
from .dynamics import OMEGA_MAX, V_MAX

BEST_DISTANCE = 1.5  # d*: preferred engagement range
N_CIRCLE = 180
K_CANDIDATES = 4
LOOKAHEAD = 0.4
GOAL_TOLERANCE = 0.1
A_MAX = 2.0
AIM_GAIN = 3.0
SQRT2 = math.sqrt(2.0)


class PlanningError(ValueError):
    pass


# ----------------------------------------------------------------- k-means

def _angle_order(centers: np.ndarray, origin: np.ndarray) -> np.ndarray:
    ang = np.arctan2(centers[:, 1] - origin[1], centers[:, 0] - origin[0])
    return np.lexsort((centers[:, 1], centers[:, 0], ang))


def kmeans(points, k: int, seed: int = 0, max_iter: int = 50) -> np.ndarray:
    """Lloyd's k-means with farthest-point seeding.

    The first centre is a seeded random point, every further centre is the
    point farthest from those already chosen. Centres are returned sorted by
    angle around the mean of ``points``.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    n = len(pts)
    if n == 0:
        raise ValueError("kmeans needs at least one point")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    first = int(np.random.default_rng(seed).integers(n))
    centers = kernels.kmeans_lloyd(pts, int(k), first, int(max_iter))
    return centers[_angle_order(centers, pts.mean(axis=0))]


# -------------------------------------------------------- candidate points

@dataclass(frozen=True)
class CandidateSet:
    """Firing positions around one opponent."""
    opponent: int
    center: Tuple[float, float]
    points: np.ndarray  # (k, 2)
    sample_index: np.ndarray  # (k,) index into the circle samples, -1 for fallback cells
    seed: int
    degenerate: bool = False


def circle_samples(center: Sequence[float], radius: float = BEST_DISTANCE,
                   n: int = N_CIRCLE) -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(n) / n
    return np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1)


@lru_cache(maxsize=4096)
def _candidates_cached(arena: Arena, x: float, y: float, k: int, seed: int, radius: float,
                       inflation: float):
    samples = circle_samples((x, y), radius)
    free = np.flatnonzero(arena.free_mask(samples[:, 0], samples[:, 1], inflation))
    if len(free) == 0:
        # fully enclosed opponent: fall back to the nearest free grid cells
        cells = np.argwhere(arena.grid == 0)
        if len(cells) == 0:
            raise PlanningError("arena has no free cell")
        centers = (cells[:, ::-1] + 0.5) * arena.cell_size
        d2 = (centers[:, 0] - x) ** 2 + (centers[:, 1] - y) ** 2
        order = np.argsort(d2, kind="stable")[:k]
        pts = centers[np.resize(order, k)]
        return pts, np.full(k, -1, dtype=np.int64), True
    if len(free) < k:
        idx = np.resize(free, k)
        return samples[idx], idx, True
    centers = kmeans(samples[free], k, seed)
    idx = np.empty(k, dtype=np.int64)
    for j, c in enumerate(centers):
        d2 = ((samples[free] - c) ** 2).sum(axis=1)
        idx[j] = free[int(np.argmin(d2))]
    idx.sort()
    return samples[idx], idx, False


def candidates_around(arena: Arena, center: Sequence[float], k: int = K_CANDIDATES,
                      seed: int = 0, radius: float = BEST_DISTANCE,
                      inflation: float = ROBOT_INFLATION, opponent: int = -1) -> CandidateSet:
    """k free points on the circle of ``radius`` around ``center``.

    Points are snapped k-means centres of the surviving circle samples and are
    ordered by sample angle. Fewer than k survivors are padded cyclically.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    x, y = float(center[0]), float(center[1])
    pts, idx, degenerate = _candidates_cached(arena, x, y, int(k), int(seed), float(radius),
                                              float(inflation))
    pts = pts.copy()
    pts.setflags(write=False)
    return CandidateSet(opponent, (x, y), pts, idx.copy(), int(seed), degenerate)


def candidate_points(world, opponent: int, k: int = K_CANDIDATES, seed: int = 0,
                     arena: Optional[Arena] = None, radius: float = BEST_DISTANCE) -> CandidateSet:
    if arena is None:
        from .arena import default_arena
        arena = default_arena()
    if world.hp[opponent] <= 0:
        raise PlanningError(f"opponent {opponent} is dead")
    return candidates_around(arena, world.position(opponent), k, seed, radius,
                             opponent=opponent)


# ------------------------------------------------------------- path search

@dataclass(frozen=True)
class PlannedPath:
    waypoints: np.ndarray  # (n, 2)
    speeds: np.ndarray  # (n,)
    remaining: np.ndarray  # (n,) arc length from each waypoint to the end

    @property
    def goal(self) -> Tuple[float, float]:
        return (float(self.waypoints[-1, 0]), float(self.waypoints[-1, 1]))

    def __len__(self) -> int:
        return len(self.waypoints)


def grid_search(blocked: np.ndarray, start: Tuple[int, int], goal: Tuple[int, int]):
    """8-connected A* on a boolean grid. Returns (cells, cost); cells is empty
    when the goal is unreachable."""
    grid = np.ascontiguousarray(blocked, dtype=np.uint8)
    rows, cols = grid.shape
    for r, c in (start, goal):
        if not (0 <= r < rows and 0 <= c < cols):
            raise PlanningError(f"cell {(r, c)} outside the grid")
    if grid[start]:
        raise PlanningError("start cell is blocked")
    cells, n_straight, n_diag = kernels.astar(grid, int(start[0]), int(start[1]),
                                              int(goal[0]), int(goal[1]))
    if not cells:
        return [], math.inf
    return [tuple(c) for c in cells], n_straight + n_diag * SQRT2


def speed_profile(waypoints: np.ndarray, v_max: float = V_MAX, a_max: float = A_MAX):
    seg = np.hypot(*np.diff(waypoints, axis=0).T) if len(waypoints) > 1 else np.zeros(0)
    remaining = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return np.minimum(v_max, np.sqrt(2.0 * a_max * remaining)), remaining


def make_path(waypoints, v_max: float = V_MAX, a_max: float = A_MAX) -> PlannedPath:
    wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    if len(wp) == 0:
        raise PlanningError("empty path")
    speeds, remaining = speed_profile(wp, v_max, a_max)
    return PlannedPath(wp, speeds, remaining)


def plan_path(start: Sequence[float], goal: Sequence[float], arena: Arena,
              v_max: float = V_MAX, a_max: float = A_MAX) -> Optional[PlannedPath]:
    """Grid-optimal path between cell centres; ``None`` when unreachable.

    The goal is snapped to its nearest free cell; a blocked start raises.
    """
    s = arena.to_cell(start)
    if arena.grid[s]:
        raise PlanningError(f"start {tuple(start)} lies in an inflated obstacle")
    g = arena.nearest_free_cell(goal)
    cells, _ = grid_search(arena.grid, s, g)
    if not cells:
        return None
    return make_path([arena.cell_center(c) for c in cells], v_max, a_max)


def route(pose: Sequence[float], goal: Sequence[float], arena: Arena) -> PlannedPath:
    """Path for a robot at ``pose``: grid path from its nearest free cell with
    the exact goal appended. Falls back to a straight segment if unreachable."""
    start = arena.nearest_free_cell(pose)
    g = arena.nearest_free_cell(goal)
    cells, _ = grid_search(arena.grid, start, g)
    pts = [arena.cell_center(c) for c in cells[1:]] if cells else []
    pts.append((float(goal[0]), float(goal[1])))
    return make_path(pts)


# ---------------------------------------------------------- path following

def follow_path(pose: Sequence[float], path: PlannedPath, v_max: float = V_MAX,
                a_max: float = A_MAX, lookahead: float = LOOKAHEAD) -> Tuple[float, float, float]:
    """Holonomic pure pursuit; returns a body-frame (vx, vy, omega) with omega = 0.

    Speed follows min(v_max, sqrt(2 a_max s)) in the remaining arc length s,
    and the command is zero within 0.1 m of the final waypoint.
    """
    vx, vy = kernels.pursuit(float(pose[0]), float(pose[1]), float(pose[2]), path.waypoints,
                             path.remaining, v_max, a_max, lookahead, GOAL_TOLERANCE, V_MAX)
    return (vx, vy, 0.0)


def aim_rate(pose: Sequence[float], target: Optional[Sequence[float]]) -> float:
    """Yaw-rate command that turns the heading toward ``target``."""
    if target is None:
        return 0.0
    err = kernels.wrap_angle(math.atan2(target[1] - pose[1], target[0] - pose[0]) - pose[2])
    return min(max(AIM_GAIN * err, -OMEGA_MAX), OMEGA_MAX)
