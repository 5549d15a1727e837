"""Rule-based opponents at three difficulty levels."""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arena import Arena
from .planning import BEST_DISTANCE, K_CANDIDATES, CandidateSet, candidate_points
from .world import WorldState, enemies_of

LEVEL_NAMES = {1: "easy", 2: "middle", 3: "hard"}
LOS_PENALTY = 0.5


def normalize_level(level) -> str:
    if isinstance(level, str) and level in LEVEL_NAMES.values():
        return level
    if isinstance(level, str) and level.strip().isdigit():
        level = int(level)
    if isinstance(level, (int, np.integer)) and not isinstance(level, bool) and int(level) in LEVEL_NAMES:
        return LEVEL_NAMES[int(level)]
    raise ValueError(f"unknown bot level {level!r}; expected 1/2/3 or easy/middle/hard")


@dataclass(frozen=True)
class BotDecision:
    robot: int
    target: int
    goal_index: int
    goal: Tuple[float, float]

    @property
    def target_slot(self) -> int:
        return enemies_of(self.robot).index(self.target)

    @property
    def action(self) -> int:
        return 2 * self.goal_index + self.target_slot


def _nearest_index(p: Sequence[float], pts: np.ndarray) -> int:
    return int(np.argmin(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])))


def _least_hp(world: WorldState, living: List[int]) -> int:
    return min(living, key=lambda e: (int(world.hp[e]), e))


def point_score(point: Sequence[float], enemy_pos: Sequence[float], arena: Arena,
                d_star: float = BEST_DISTANCE) -> float:
    d = math.hypot(point[0] - enemy_pos[0], point[1] - enemy_pos[1])
    blocked = 0.0 if arena.line_of_sight(point, enemy_pos) else 1.0
    return -abs(d - d_star) - LOS_PENALTY * blocked


def siege_assignment(bots: Sequence[Sequence[float]], points: Sequence[Sequence[float]]):
    """Travel-minimising pairing of two bots to two points; returns point order."""
    (a, b), (p, q) = bots, points
    straight = math.dist(a, p) + math.dist(b, q)
    crossed = math.dist(a, q) + math.dist(b, p)
    return (0, 1) if straight <= crossed else (1, 0)


def bot_actions(level, world: WorldState, seed: int = 0, arena: Optional[Arena] = None,
                team: int = 1, candidates: Optional[Dict[int, CandidateSet]] = None,
                k: int = K_CANDIDATES, d_star: float = BEST_DISTANCE) -> List[BotDecision]:
    """Goals and targets for the living robots of ``team``.

    Motion toward the goal and the shot gate are handled by the environment.
    """
    level = normalize_level(level)
    if arena is None:
        from .arena import default_arena
        arena = default_arena()
    bots = [r for r in (2 * team, 2 * team + 1) if world.hp[r] > 0]
    living = [e for e in enemies_of(2 * team) if world.hp[e] > 0]
    if not bots or not living:
        return []
    cands = dict(candidates or {})
    for e in living:
        if e not in cands:
            cands[e] = candidate_points(world, e, k, seed, arena=arena, radius=d_star)

    if level == "hard":
        target = _least_hp(world, living)
        pts = cands[target].points
        epos = world.position(target)
        scores = [point_score(p, epos, arena, d_star) for p in pts]
        best = sorted(range(len(pts)), key=lambda i: (-scores[i], i))[:2]
        if len(bots) == 1 or len(best) == 1:
            pos = world.position(bots[0])
            j = min(best, key=lambda i: (math.dist(pos, pts[i]), i))
            return [BotDecision(bots[0], target, j, tuple(map(float, pts[j])))]
        order = siege_assignment([world.position(b) for b in bots], [pts[i] for i in best])
        return [BotDecision(b, target, best[o], tuple(map(float, pts[best[o]])))
                for b, o in zip(bots, order)]

    out = []
    for b in bots:
        pos = world.position(b)
        if level == "easy":
            target = min(living, key=lambda e: (world.distance(b, e), e))
        else:
            target = _least_hp(world, living)
        j = _nearest_index(pos, cands[target].points)
        out.append(BotDecision(b, target, j, tuple(map(float, cands[target].points[j]))))
    return out
