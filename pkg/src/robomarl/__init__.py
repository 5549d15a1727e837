"""Headless 2v2 robot combat simulator with IQL/VDN/QMIX learners."""
from .arena import Arena, default_arena, load_arena
from .dynamics import DynamicsContext
from .env import CombatEnv, build_observation, decode_action, encode_action
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["Arena", "BACKEND", "CombatEnv", "DynamicsContext", "build_observation",
           "decode_action", "default_arena", "encode_action", "load_arena"]
