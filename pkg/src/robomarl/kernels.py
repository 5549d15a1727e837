"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports cleanly; otherwise
the pure-Python ``_core_py`` fallback is loaded. Set ``ROBOMARL_BACKEND=python``
to force the fallback (``compiled`` makes a missing extension an error).
"""
import importlib
import logging
import os

logger = logging.getLogger(__name__)

_NAMES = ("astar", "body_tick", "kmeans_lloyd", "mecanum_forward", "mecanum_inverse",
          "pid_step", "points_free", "pursuit", "ray_cast", "segment_clear", "world_tick",
          "wrap_angle")


def load_backend(name):
    """Return the kernel module for ``name`` in {"compiled", "python"}."""
    if name == "compiled":
        return importlib.import_module("robomarl._core")
    if name == "python":
        return importlib.import_module("robomarl._core_py")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def _select():
    wanted = os.environ.get("ROBOMARL_BACKEND", "auto").strip().lower()
    if wanted in ("python", "compiled"):
        return wanted, load_backend(wanted)
    try:
        return "compiled", load_backend("compiled")
    except ImportError as exc:
        logger.info("compiled kernels unavailable (%s); using pure-Python fallback", exc)
        return "python", load_backend("python")


BACKEND, _impl = _select()

astar = _impl.astar
body_tick = _impl.body_tick
kmeans_lloyd = _impl.kmeans_lloyd
mecanum_forward = _impl.mecanum_forward
mecanum_inverse = _impl.mecanum_inverse
pid_step = _impl.pid_step
points_free = _impl.points_free
pursuit = _impl.pursuit
ray_cast = _impl.ray_cast
segment_clear = _impl.segment_clear
world_tick = _impl.world_tick
wrap_angle = _impl.wrap_angle
