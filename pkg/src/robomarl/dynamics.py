"""Mecanum-wheel robot dynamics.

The twist is expressed in the body frame (vx forward, vy left, omega CCW).
Wheel order everywhere is FL, FR, RL, RR.
"""
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence, Tuple

import numpy as np

from . import _layout as L
from . import kernels

DT = 0.02
V_MAX = 2.0
OMEGA_MAX = 1.75
LEVELS = ("easy", "middle", "hard")


@dataclass(frozen=True)
class DynamicsContext:
    """Physical parameters of one robot (the Sim2Real knobs)."""

    mu_slide: float = 1.0
    mu_roll: float = 0.02
    tau_max: float = 1.5
    kp: float = 0.25
    ki: float = 0.1
    kd: float = 0.001
    mass: float = 15.0
    wheel_inertia: float = 1e-3
    wheel_radius: float = 0.05
    lx: float = 0.2
    ly: float = 0.2
    i_max: float = 2.0
    gravity: float = 9.81
    footprint_radius: float = 0.3
    p_max: float = 0.9
    d0: float = 2.5
    kappa: float = 2.0
    level: str = "easy"

    def __post_init__(self):
        positive = ("tau_max", "kp", "mass", "wheel_inertia", "wheel_radius", "lx", "ly",
                    "i_max", "gravity", "footprint_radius", "d0", "kappa")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        for name in ("ki", "kd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be >= 0, got {v!r}")
        for name in ("mu_slide", "mu_roll"):
            v = getattr(self, name)
            if not 0 < v <= 2:
                raise ValueError(f"{name} must lie in (0, 2], got {v!r}")
        if not 0 < self.p_max <= 1:
            raise ValueError(f"p_max must lie in (0, 1], got {self.p_max!r}")
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}, got {self.level!r}")

    @property
    def hit_params(self) -> Tuple[float, float, float]:
        return (self.p_max, self.d0, self.kappa)

    def replace(self, **changes) -> "DynamicsContext":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def param_row(self) -> np.ndarray:
        """Packed parameter vector consumed by the kernels."""
        row = np.empty(L.PARAM_SIZE)
        row[L.MU_SLIDE] = self.mu_slide
        row[L.MU_ROLL] = self.mu_roll
        row[L.TAU_MAX] = self.tau_max
        row[L.KP] = self.kp
        row[L.KI] = self.ki
        row[L.KD] = self.kd
        row[L.MASS] = self.mass
        row[L.WHEEL_INERTIA] = self.wheel_inertia
        row[L.WHEEL_RADIUS] = self.wheel_radius
        row[L.LX] = self.lx
        row[L.LY] = self.ly
        row[L.I_MAX] = self.i_max
        row[L.GRAVITY] = self.gravity
        row[L.RADIUS] = self.footprint_radius
        row[L.V_MAX] = V_MAX
        row[L.W_MAX] = OMEGA_MAX
        return row


@dataclass(frozen=True)
class RobotBody:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    twist: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    wheel_speeds: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    integrals: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    prev_errors: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    footprint_radius: float = 0.3

    def to_row(self) -> np.ndarray:
        row = np.empty(L.BODY_SIZE)
        row[L.X], row[L.Y], row[L.TH] = self.x, self.y, self.theta
        row[L.VX:L.WZ + 1] = self.twist
        row[L.W0:L.W0 + 4] = self.wheel_speeds
        row[L.I0:L.I0 + 4] = self.integrals
        row[L.E0:L.E0 + 4] = self.prev_errors
        return row

    @classmethod
    def from_row(cls, row, footprint_radius: float = 0.3) -> "RobotBody":
        r = [float(v) for v in row]
        return cls(r[L.X], r[L.Y], r[L.TH], tuple(r[L.VX:L.WZ + 1]),
                   tuple(r[L.W0:L.W0 + 4]), tuple(r[L.I0:L.I0 + 4]),
                   tuple(r[L.E0:L.E0 + 4]), footprint_radius)


def clamp_twist(vx: float, vy: float, omega: float) -> Tuple[float, float, float]:
    return (min(max(vx, -V_MAX), V_MAX), min(max(vy, -V_MAX), V_MAX),
            min(max(omega, -OMEGA_MAX), OMEGA_MAX))


def mecanum_inverse(twist: Sequence[float], wheel_radius: float = 0.05, lx: float = 0.2,
                    ly: float = 0.2) -> Tuple[float, float, float, float]:
    """Wheel angular speeds (rad/s) that realise a body twist."""
    vx, vy, omega = twist
    return kernels.mecanum_inverse(float(vx), float(vy), float(omega), wheel_radius, lx + ly)


def mecanum_forward(wheel_speeds: Sequence[float], wheel_radius: float = 0.05, lx: float = 0.2,
                    ly: float = 0.2) -> Tuple[float, float, float]:
    """Least-squares body twist from four wheel speeds."""
    w = [float(v) for v in wheel_speeds]
    return kernels.mecanum_forward(w[0], w[1], w[2], w[3], wheel_radius, lx + ly)


def pid_control(setpoints, measured, pid_state, ctx: DynamicsContext, dt: float = DT):
    """Per-wheel PID torques with saturation at ``ctx.tau_max``.

    ``pid_state`` is a sequence of (integral, previous_error) pairs; returns
    ``(torques, new_state)``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    torques, state = [], []
    for sp, ms, (integ, prev) in zip(setpoints, measured, pid_state):
        tau, integ, err = kernels.pid_step(float(sp), float(ms), float(integ), float(prev),
                                           ctx.kp, ctx.ki, ctx.kd, ctx.i_max, ctx.tau_max, dt)
        torques.append(tau)
        state.append((integ, err))
    return tuple(torques), tuple(state)


_EMPTY_RECTS = np.zeros((0, 4))


def physics_tick(body: RobotBody, command: Sequence[float], ctx: DynamicsContext,
                 dt: float = DT, arena=None) -> RobotBody:
    """Advance one robot by a single fixed timestep.

    Without an arena the robot moves in an unbounded plane.
    """
    row = body.to_row()
    params = ctx.param_row()
    if arena is None:
        rects, length, width = _EMPTY_RECTS, -1.0, -1.0
    else:
        rects, length, width = arena.rects, arena.length, arena.width
    vx, vy, omega = command
    kernels.body_tick(row, float(vx), float(vy), float(omega), params, rects, length, width, dt)
    if not np.isfinite(row).all():
        raise FloatingPointError("non-finite robot state")
    return RobotBody.from_row(row, body.footprint_radius)


def world_tick(bodies: np.ndarray, commands: np.ndarray, params: np.ndarray,
               movable: np.ndarray, arena, dt: float = DT) -> None:
    """Advance packed robot states in place, including robot-robot contacts."""
    kernels.world_tick(bodies, commands, params, movable, arena.rects, arena.length,
                       arena.width, dt)
    if not np.isfinite(bodies).all():
        raise FloatingPointError("non-finite robot state")
