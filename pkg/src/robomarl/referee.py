"""Referee: shot resolution, HP/bullet accounting, win judgment and rewards."""
import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from . import kernels
from .world import WorldState, team_of

ARMORS = ("front", "left", "rear", "right")


@dataclass(frozen=True)
class CombatConfig:
    hp0: int = 500
    bullets0: int = 50
    damage: int = 50
    range_max: float = 3.0
    angle_gate: float = math.radians(30.0)
    armor_multipliers: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.hp0 < 1 or self.bullets0 < 0 or self.damage < 1:
            raise ValueError("hp0 >= 1, bullets0 >= 0 and damage >= 1 required")
        if self.range_max <= 0 or not 0 < self.angle_gate <= math.pi:
            raise ValueError("range_max > 0 and angle_gate in (0, pi] required")


@dataclass(frozen=True)
class RewardWeights:
    r_h: float = 0.02
    r_k: float = 3.0
    r_w: float = 20.0

    def __post_init__(self):
        if min(self.r_h, self.r_k, self.r_w) < 0:
            raise ValueError("reward weights must be non-negative")


class Verdict(str, enum.Enum):
    ONGOING = "ongoing"
    RED_WINS = "red_wins"
    BLUE_WINS = "blue_wins"
    DRAW = "draw"

    def winner(self) -> Optional[int]:
        return {Verdict.RED_WINS: 0, Verdict.BLUE_WINS: 1}.get(self)


@dataclass
class ShotOutcome:
    shooter: int
    target: int
    fired: bool = False
    hit: bool = False
    armor: Optional[str] = None
    damage: int = 0
    distance: float = 0.0
    hp_removed: int = 0

    def as_dict(self) -> dict:
        return {"shooter": self.shooter, "target": self.target, "fired": self.fired,
                "hit": self.hit, "armor": self.armor, "damage": self.damage,
                "distance": round(self.distance, 6), "hp_removed": self.hp_removed}


def hit_probability(d: float, hit_params: Sequence[float]) -> float:
    """Logistic hit rate p_max / (1 + exp(kappa (d - d0)))."""
    p_max, d0, kappa = hit_params
    if d < 0:
        raise ValueError("distance must be non-negative")
    z = kappa * (d - d0)
    if z > 700.0:
        return 0.0
    return p_max / (1.0 + math.exp(z))


def _bearing(world: WorldState, frm: int, to: int) -> float:
    """Bearing of robot ``to`` seen from robot ``frm``, relative to its heading."""
    a, b = world.bodies[frm], world.bodies[to]
    return kernels.wrap_angle(math.atan2(b[1] - a[1], b[0] - a[0]) - a[2])


def armor_facing(world: WorldState, shooter: int, target: int) -> str:
    """Armor plate of ``target`` that faces ``shooter``."""
    rel = _bearing(world, target, shooter)
    if -math.pi / 4 <= rel <= math.pi / 4:
        return "front"
    if math.pi / 4 < rel <= 3 * math.pi / 4:
        return "left"
    if -3 * math.pi / 4 <= rel < -math.pi / 4:
        return "right"
    return "rear"


def can_fire(world: WorldState, shooter: int, target: int, arena,
             config: CombatConfig) -> Tuple[bool, float]:
    """Gate check: ammunition, living target, range, bearing and line of sight."""
    sx, sy = world.bodies[shooter, :2].tolist()
    tx, ty = world.bodies[target, :2].tolist()
    d = math.hypot(tx - sx, ty - sy)
    if world.bullets[shooter] <= 0 or world.hp[target] <= 0 or world.hp[shooter] <= 0:
        return False, d
    if d > config.range_max:
        return False, d
    if abs(_bearing(world, shooter, target)) > config.angle_gate:
        return False, d
    if not kernels.segment_clear(sx, sy, tx, ty, arena.rects):
        return False, d
    return True, d


def resolve_shot(shooter: int, target: int, world: WorldState, rng, arena,
                 hit_params: Sequence[float], config: CombatConfig = CombatConfig(),
                 apply: bool = True) -> ShotOutcome:
    """Resolve one shot attempt. With ``apply`` the world is updated in place."""
    if not (0 <= shooter < len(world.hp) and 0 <= target < len(world.hp)):
        raise IndexError(f"invalid robot ids {shooter}, {target}")
    if team_of(shooter) == team_of(target):
        raise ValueError("target must be on the opposing team")
    fired, d = can_fire(world, shooter, target, arena, config)
    out = ShotOutcome(shooter, target, distance=d)
    if not fired:
        return out
    out.fired = True
    if rng.random() < hit_probability(d, hit_params):
        out.hit = True
        out.armor = armor_facing(world, shooter, target)
        mult = config.armor_multipliers[ARMORS.index(out.armor)]
        out.damage = max(1, int(round(config.damage * mult)))
    if apply:
        apply_shot(world, out)
    return out


def apply_shot(world: WorldState, out: ShotOutcome) -> None:
    if not out.fired:
        return
    world.bullets[out.shooter] -= 1
    if out.hit:
        removed = int(min(out.damage, world.hp[out.target]))
        world.hp[out.target] -= removed
        world.damage_dealt[team_of(out.shooter)] += removed
        out.hp_removed = removed


def judge(world: WorldState, tick: int, tick_limit: int) -> Verdict:
    """Round verdict from the two referee rules (annihilation, then damage at time-up)."""
    red = world.team_alive(0)
    blue = world.team_alive(1)
    if not red and not blue:
        return Verdict.DRAW
    if not blue:
        return Verdict.RED_WINS
    if not red:
        return Verdict.BLUE_WINS
    if tick >= tick_limit:
        dr, db = int(world.damage_dealt[0]), int(world.damage_dealt[1])
        if dr > db:
            return Verdict.RED_WINS
        if db > dr:
            return Verdict.BLUE_WINS
        return Verdict.DRAW
    return Verdict.ONGOING


def team_reward(damage: Sequence[int], kills: Sequence[int], verdict: Verdict,
                weights: RewardWeights = RewardWeights()) -> Tuple[float, float]:
    """Per-team reward for one env step given that step's damage and kill tallies."""
    winner = verdict.winner()
    out = []
    for team in (0, 1):
        r = weights.r_h * damage[team] + weights.r_k * kills[team]
        if winner == team:
            r += weights.r_w
        out.append(float(r))
    return out[0], out[1]
