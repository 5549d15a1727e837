"""Mutable simulation state shared by the referee, bots and environment."""
from dataclasses import dataclass, field
from typing import List

import math

import numpy as np

from . import _layout as L

N_ROBOTS = 4
TEAMS = ("red", "blue")


def team_of(robot: int) -> int:
    return robot // 2


def ally_of(robot: int) -> int:
    return robot ^ 1


def enemies_of(robot: int):
    base = 2 if team_of(robot) == 0 else 0
    return (base, base + 1)


@dataclass
class WorldState:
    bodies: np.ndarray  # (4, BODY_SIZE) packed kinematic + controller state
    hp: np.ndarray  # (4,) int
    bullets: np.ndarray  # (4,) int
    damage_dealt: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))
    tick: int = 0
    events: List[dict] = field(default_factory=list)

    @property
    def alive(self) -> np.ndarray:
        return self.hp > 0

    def position(self, robot: int):
        return (float(self.bodies[robot, L.X]), float(self.bodies[robot, L.Y]))

    def heading(self, robot: int) -> float:
        return float(self.bodies[robot, L.TH])

    def distance(self, a: int, b: int) -> float:
        dx = float(self.bodies[a, L.X] - self.bodies[b, L.X])
        dy = float(self.bodies[a, L.Y] - self.bodies[b, L.Y])
        return math.hypot(dx, dy)

    def team_alive(self, team: int) -> bool:
        return bool(self.hp[2 * team] > 0 or self.hp[2 * team + 1] > 0)

    def copy(self) -> "WorldState":
        return WorldState(self.bodies.copy(), self.hp.copy(), self.bullets.copy(),
                          self.damage_dealt.copy(), self.tick, list(self.events))

    @classmethod
    def empty(cls, hp0: int, bullets0: int) -> "WorldState":
        return cls(np.zeros((N_ROBOTS, L.BODY_SIZE)),
                   np.full(N_ROBOTS, hp0, dtype=np.int64),
                   np.full(N_ROBOTS, bullets0, dtype=np.int64))
