"""Two-versus-two combat environment.

Robots 0 and 1 form the red (learning) team, robots 2 and 3 the blue team,
driven either by a rule-based bot or by an external policy. One environment
step lasts 0.4 s: 20 physics ticks followed by one shot per living robot.
"""
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _layout as L
from .arena import Arena, default_arena
from .bots import BotDecision, bot_actions, normalize_level
from .dynamics import DT, OMEGA_MAX, V_MAX, DynamicsContext, world_tick
from .planning import (BEST_DISTANCE, K_CANDIDATES, CandidateSet, aim_rate, candidates_around,
                       follow_path, route)
from .referee import (CombatConfig, RewardWeights, Verdict, apply_shot, judge, resolve_shot,
                      team_reward)
from .world import N_ROBOTS, WorldState, enemies_of, team_of

OBS_SIZE = 37
N_ACTIONS = 8
N_AGENTS = 2
MAX_STEPS = 50
TICKS_PER_STEP = 20
TICK_LIMIT = MAX_STEPS * TICKS_PER_STEP

DYNAMICS_KEYS = ("mu_slide", "mu_roll", "tau_max", "kp", "ki", "kd", "mass", "wheel_inertia",
                 "p_max", "d0", "kappa")
COMBAT_KEYS = ("hp0", "bullets0")
ALIASES = {"VK1": "mu_slide"}
CONTEXT_KEYS = tuple(sorted(ALIASES)) + DYNAMICS_KEYS + COMBAT_KEYS + ("level",)


class ContextError(ValueError):
    pass


# ------------------------------------------------------------- contexts

def resolve_contexts(contexts: Optional[Mapping], base: DynamicsContext = DynamicsContext(),
                     combat: CombatConfig = CombatConfig()) -> Tuple[DynamicsContext, CombatConfig]:
    """Apply named overrides; unknown keys and out-of-range values raise."""
    dyn, com = {}, {}
    for key, value in (contexts or {}).items():
        name = ALIASES.get(key, key)
        if name == "level":
            try:
                dyn["level"] = normalize_level(value)
            except ValueError as exc:
                raise ContextError(str(exc)) from None
        elif name in DYNAMICS_KEYS:
            dyn[name] = _as_float(key, value)
        elif name in COMBAT_KEYS:
            v = _as_float(key, value)
            if v != int(v):
                raise ContextError(f"context {key!r} must be an integer, got {value!r}")
            com[name] = int(v)
        else:
            raise ContextError(f"unknown context key {key!r}; known: {', '.join(CONTEXT_KEYS)}")
    try:
        return base.replace(**dyn), _replace_combat(combat, com)
    except ValueError as exc:
        raise ContextError(str(exc)) from None


def _replace_combat(combat: CombatConfig, changes: dict) -> CombatConfig:
    from dataclasses import replace
    return replace(combat, **changes) if changes else combat


def _as_float(key, value) -> float:
    if isinstance(value, bool):
        raise ContextError(f"context {key!r} must be numeric, got {value!r}")
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ContextError(f"context {key!r} must be numeric, got {value!r}") from None
    if not math.isfinite(v):
        raise ContextError(f"context {key!r} must be finite")
    return v


# --------------------------------------------------------------- actions

def encode_action(goal_index: int, target_index: int) -> int:
    if not (0 <= goal_index < K_CANDIDATES and 0 <= target_index < 2):
        raise ValueError(f"invalid (goal, target) = ({goal_index}, {target_index})")
    return 2 * goal_index + target_index


def decode_action(index: int) -> Tuple[int, int]:
    if isinstance(index, bool) or not 0 <= int(index) < N_ACTIONS or int(index) != index:
        raise ValueError(f"action index must lie in [0, {N_ACTIONS}), got {index!r}")
    index = int(index)
    return index // 2, index % 2


# ----------------------------------------------------------- observation

def slot_order(agent: int) -> Tuple[int, int, int, int]:
    """Robot ids in observation order: self, ally, enemy1, enemy2."""
    e1, e2 = enemies_of(agent)
    return (agent, agent ^ 1, e1, e2)


def build_observation(world: WorldState, candidates: Mapping[int, np.ndarray], agent: int,
                      steps_remaining: int, hp0: int, bullets0: int, length: float = 8.1,
                      width: float = 5.1, max_steps: int = MAX_STEPS) -> np.ndarray:
    """Normalised 37-vector seen by robot ``agent``."""
    order = slot_order(agent)
    obs = np.empty(OBS_SIZE)
    for s, r in enumerate(order):
        obs[3 * s] = world.bodies[r, L.X] / length
        obs[3 * s + 1] = world.bodies[r, L.Y] / width
        obs[3 * s + 2] = world.bodies[r, L.TH] / math.pi
    j = 12
    for e in order[2:]:
        pts = np.asarray(candidates[e], dtype=np.float64).reshape(-1, 2)
        obs[j:j + 2 * K_CANDIDATES:2] = pts[:, 0] / length
        obs[j + 1:j + 2 * K_CANDIDATES:2] = pts[:, 1] / width
        j += 2 * K_CANDIDATES
    for s, r in enumerate(order):
        obs[28 + s] = world.hp[r] / hp0
        obs[32 + s] = world.bullets[r] / bullets0 if bullets0 > 0 else 0.0
    obs[36] = steps_remaining / max_steps
    return obs


# ------------------------------------------------------------ environment

@dataclass
class _Order:
    """Motion and aim command held by one robot for the current step."""
    target: Optional[int]
    path: object = None
    twist: Optional[Tuple[float, float, float]] = None


Policy = Callable[[List[np.ndarray]], Sequence]


class CombatEnv:
    """Gym-style multi-agent environment for the red team.

    ``reset`` returns ``(observations, info)``; ``step`` returns
    ``(observations, reward, done, info)`` with a single team reward.
    """

    def __init__(self, seed: int = 0, contexts: Optional[Mapping] = None,
                 arena: Optional[Arena] = None, instance_id: int = 0, no_graphics: bool = True,
                 time_scale: float = 1.0, opponent: Optional[Policy] = None,
                 continuous: bool = False, obs_mask: Optional[Callable] = None,
                 lidar: bool = False, weights: RewardWeights = RewardWeights(),
                 combat: CombatConfig = CombatConfig(), d_star: float = BEST_DISTANCE,
                 candidate_seed: int = 0):
        if time_scale <= 0:
            raise ValueError("time_scale must be positive")
        self.arena = arena or default_arena()
        self.instance_id = int(instance_id)
        self.no_graphics = True  # headless only; accepted for parity
        self.time_scale = float(time_scale)
        self.opponent = opponent
        self.continuous = bool(continuous)
        self.obs_mask = obs_mask
        self.lidar = bool(lidar)
        self.weights = weights
        self.base_combat = combat
        self.d_star = float(d_star)
        self.candidate_seed = int(candidate_seed)
        self.base_contexts = dict(contexts or {})
        self.ctx, self.combat = resolve_contexts(self.base_contexts, combat=combat)
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.world: Optional[WorldState] = None
        self.steps = 0
        self.done = True
        self.candidates: Dict[int, CandidateSet] = {}

    # -- properties ------------------------------------------------------

    @property
    def level(self) -> str:
        return self.ctx.level

    @property
    def steps_remaining(self) -> int:
        return MAX_STEPS - self.steps

    # -- episode control -------------------------------------------------

    def reset(self, contexts: Optional[Mapping] = None, seed: Optional[int] = None):
        merged = dict(self.base_contexts)
        merged.update(contexts or {})
        self.ctx, self.combat = resolve_contexts(merged, combat=self.base_combat)
        if seed is not None:
            self.seed = int(seed)
            self.rng = np.random.default_rng(self.seed)
        self.params = np.ascontiguousarray(np.tile(self.ctx.param_row(), (N_ROBOTS, 1)))
        world = WorldState.empty(self.combat.hp0, self.combat.bullets0)
        births = self.arena.birth_areas
        margin = self.ctx.footprint_radius
        for i in range(N_ROBOTS):
            b = births[i]
            hx, hy = max(b.hx - margin, 0.0), max(b.hy - margin, 0.0)
            world.bodies[i, L.X] = b.cx + self.rng.uniform(-hx, hx)
            world.bodies[i, L.Y] = b.cy + self.rng.uniform(-hy, hy)
            world.bodies[i, L.TH] = 0.0 if team_of(i) == 0 else math.pi
        self.world = world
        self.steps = 0
        self.done = False
        self.totals = {"damage": [0, 0], "kills": [0, 0], "reward": [0.0, 0.0]}
        self._refresh_candidates()
        info = {"level": self.level, "contexts": merged, "verdict": Verdict.ONGOING.value,
                "seed": self.seed, "instance_id": self.instance_id,
                "degenerate": self._degenerate()}
        if self.lidar:
            info["lidar"] = self.lidar_scans()
        return self.observations(), info

    def _refresh_candidates(self):
        for e in range(N_ROBOTS):
            if self.world.hp[e] > 0 or e not in self.candidates:
                self.candidates[e] = candidates_around(
                    self.arena, self.world.position(e), K_CANDIDATES, self.candidate_seed,
                    self.d_star, self.arena.inflation, opponent=e)

    def _degenerate(self) -> List[int]:
        return [e for e, c in sorted(self.candidates.items()) if c.degenerate]

    # -- observations ----------------------------------------------------

    def observe(self, agent: int) -> np.ndarray:
        obs = build_observation(self.world, {e: c.points for e, c in self.candidates.items()},
                                agent, self.steps_remaining, self.combat.hp0,
                                self.combat.bullets0, self.arena.length, self.arena.width)
        if self.obs_mask is not None:
            obs = np.asarray(self.obs_mask(obs, agent), dtype=np.float64)
        return obs

    def observations(self, team: int = 0) -> List[np.ndarray]:
        return [self.observe(2 * team), self.observe(2 * team + 1)]

    def state(self) -> np.ndarray:
        """Global state handed to centralised mixers (agent 0's view)."""
        return self.observe(0)

    def lidar_scans(self) -> np.ndarray:
        w = self.world
        discs = np.column_stack([w.bodies[:, L.X], w.bodies[:, L.Y],
                                 np.full(N_ROBOTS, self.ctx.footprint_radius)])
        return np.stack([self.arena.lidar_scan(tuple(w.bodies[i, :3]),
                                               robots=np.delete(discs, i, axis=0))
                         for i in range(N_ROBOTS)])

    # -- action handling -------------------------------------------------

    def _living_target(self, robot: int, slot: int) -> Optional[int]:
        enemies = enemies_of(robot)
        t = enemies[slot]
        if self.world.hp[t] > 0:
            return t
        other = enemies[1 - slot]
        return other if self.world.hp[other] > 0 else None

    def _discrete_order(self, robot: int, action) -> _Order:
        goal_idx, slot = decode_action(action)
        chosen = enemies_of(robot)[slot]
        target = self._living_target(robot, slot)
        goal = self.candidates[chosen if target is None else target].points[goal_idx]
        return _Order(target, route(self.world.position(robot), goal, self.arena))

    def _continuous_order(self, robot: int, action) -> _Order:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (4,) or not np.isfinite(a).all():
            raise ValueError("continuous action must be finite (vx, vy, omega, target_index)")
        slot = int(a[3])
        if slot not in (0, 1):
            raise ValueError("target_index must be 0 or 1")
        twist = (min(max(a[0], -V_MAX), V_MAX), min(max(a[1], -V_MAX), V_MAX),
                 min(max(a[2], -OMEGA_MAX), OMEGA_MAX))
        return _Order(self._living_target(robot, slot), twist=twist)

    def _team_orders(self, team: int, actions) -> Dict[int, _Order]:
        if actions is None or len(actions) != N_AGENTS:
            raise ValueError(f"expected {N_AGENTS} actions, got {actions!r}")
        orders = {}
        for k, robot in enumerate((2 * team, 2 * team + 1)):
            if self.world.hp[robot] <= 0:
                continue  # dead agents are ignored (no-op)
            if self.continuous and team == 0:
                orders[robot] = self._continuous_order(robot, actions[k])
            else:
                orders[robot] = self._discrete_order(robot, actions[k])
        return orders

    def _bot_orders(self) -> Tuple[Dict[int, _Order], List[dict]]:
        if self.opponent is not None:
            acts = list(self.opponent(self.observations(team=1)))
            return self._team_orders(1, acts), [{"robot": r, "action": int(a)}
                                                for r, a in zip((2, 3), acts)]
        decisions = bot_actions(self.level, self.world, self.candidate_seed, self.arena, team=1,
                                candidates=self.candidates, d_star=self.d_star)
        orders = {d.robot: _Order(d.target, route(self.world.position(d.robot), d.goal, self.arena))
                  for d in decisions}
        log = [{"robot": d.robot, "target": d.target, "goal_index": d.goal_index,
                "action": d.action} for d in decisions]
        return orders, log

    # -- stepping --------------------------------------------------------

    def step(self, actions):
        if self.done or self.world is None:
            raise RuntimeError("step() called on a finished episode; call reset()")
        w = self.world
        orders = self._team_orders(0, actions)
        blue, bot_log = self._bot_orders()
        orders.update(blue)

        cmds = np.zeros((N_ROBOTS, 3))
        movable = w.alive.astype(np.uint8)
        for _ in range(TICKS_PER_STEP):
            for r, o in orders.items():
                pose = (w.bodies[r, L.X], w.bodies[r, L.Y], w.bodies[r, L.TH])
                if o.twist is not None:
                    cmds[r] = o.twist
                    continue
                vx, vy, _ = follow_path(pose, o.path)
                aim = w.position(o.target) if o.target is not None else None
                cmds[r] = (vx, vy, aim_rate(pose, aim))
            world_tick(w.bodies, cmds, self.params, movable, self.arena, DT)
            w.tick += 1

        # one shot per living robot, resolved simultaneously
        alive_before = w.alive.copy()
        damage_before = w.damage_dealt.copy()
        shots = [resolve_shot(r, o.target, w, self.rng, self.arena, self.ctx.hit_params,
                              self.combat, apply=False)
                 for r, o in sorted(orders.items()) if o.target is not None]
        for s in shots:
            apply_shot(w, s)
        for r in np.flatnonzero(alive_before & ~w.alive):
            w.bodies[r, L.VX:L.E0 + 4] = 0.0

        self.steps += 1
        step_damage = [int(v) for v in w.damage_dealt - damage_before]
        died = alive_before & ~w.alive
        kills = [int(died[2:].sum()), int(died[:2].sum())]
        verdict = judge(w, w.tick, TICK_LIMIT)
        rewards = team_reward(step_damage, kills, verdict, self.weights)
        self.done = verdict != Verdict.ONGOING or self.steps >= MAX_STEPS
        for t in (0, 1):
            self.totals["damage"][t] += step_damage[t]
            self.totals["kills"][t] += kills[t]
            self.totals["reward"][t] += rewards[t]
        self._refresh_candidates()
        info = {"verdict": verdict.value, "step": self.steps, "tick": w.tick,
                "damage": step_damage, "kills": kills, "damage_total": list(self.totals["damage"]),
                "rewards": list(rewards), "shots": [s.as_dict() for s in shots],
                "bot": bot_log, "level": self.level, "degenerate": self._degenerate()}
        if self.lidar:
            info["lidar"] = self.lidar_scans()
        return self.observations(), rewards[0], self.done, info
