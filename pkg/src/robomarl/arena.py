"""Static field geometry: obstacles, occupancy grid, line of sight and LiDAR."""
import configparser
import functools
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels

N_OBSTACLES = 9
N_BIRTH = 4
N_ZONES = 6

CELL_SIZE = 0.1
ROBOT_INFLATION = 0.3
LIDAR_RAYS = 61
LIDAR_RANGE = 6.0
LIDAR_FOV = math.radians(270.0)

HEADER = """\
# Standard 8.1 m x 5.1 m arena. SI units (metres).
# Obstacles and zones are axis-aligned rectangles given by centre (cx, cy)
# and half-extents (hx, hy). The obstacle set is point-symmetric about the
# field centre (4.05, 2.55). Heights are labels only.
"""


class ArenaError(ValueError):
    """Raised for malformed or inconsistent arena layouts."""


@dataclass(frozen=True)
class Rect:
    cx: float
    cy: float
    hx: float
    hy: float
    height: float = 0.0
    tag: str = ""

    def distance(self, x: float, y: float) -> float:
        """Euclidean distance from (x, y) to the closed rectangle (0 inside)."""
        qx = max(abs(x - self.cx) - self.hx, 0.0)
        qy = max(abs(y - self.cy) - self.hy, 0.0)
        return math.sqrt(qx * qx + qy * qy)

    def rotated(self, length: float, width: float) -> "Rect":
        return Rect(length - self.cx, width - self.cy, self.hx, self.hy, self.height, self.tag)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float


def _rect_key(r: Rect):
    return (round(r.cx, 9), round(r.cy, 9), round(r.hx, 9), round(r.hy, 9))


@dataclass(frozen=True, eq=False)
class Arena:
    length: float
    width: float
    obstacles: Tuple[Rect, ...]
    birth_areas: Tuple[Rect, ...]
    zones: Tuple[Rect, ...]
    cell_size: float = CELL_SIZE
    inflation: float = ROBOT_INFLATION
    rects: np.ndarray = field(init=False, repr=False)
    grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rects = np.array([[o.cx, o.cy, o.hx, o.hy] for o in self.obstacles],
                         dtype=np.float64).reshape(-1, 4)
        rects.setflags(write=False)
        object.__setattr__(self, "rects", np.ascontiguousarray(rects))
        cols = int(round(self.length / self.cell_size))
        rows = int(round(self.width / self.cell_size))
        xs = (np.arange(cols) + 0.5) * self.cell_size
        ys = (np.arange(rows) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(xs, ys)
        grid = (~self.free_mask(gx, gy, self.inflation)).astype(np.uint8)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    # -- geometry queries -------------------------------------------------

    def is_free(self, p: Sequence[float], inflation: float = 0.0) -> bool:
        """True iff ``p`` is in the field shrunk by ``inflation`` and farther
        than ``inflation`` from every obstacle."""
        x, y = float(p[0]), float(p[1])
        if not (inflation <= x <= self.length - inflation
                and inflation <= y <= self.width - inflation):
            return False
        return all(o.distance(x, y) > inflation for o in self.obstacles)

    def free_mask(self, xs, ys, inflation: float = 0.0) -> np.ndarray:
        """Vectorised :meth:`is_free` over coordinate arrays."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        shape = np.broadcast(xs, ys).shape
        flat_x = np.ascontiguousarray(np.broadcast_to(xs, shape), dtype=np.float64).ravel()
        flat_y = np.ascontiguousarray(np.broadcast_to(ys, shape), dtype=np.float64).ravel()
        mask = kernels.points_free(flat_x, flat_y, self.rects, self.length, self.width,
                                   float(inflation))
        return mask.astype(bool).reshape(shape)

    def line_of_sight(self, a: Sequence[float], b: Sequence[float]) -> bool:
        """True iff the segment a->b touches no obstacle."""
        return kernels.segment_clear(float(a[0]), float(a[1]), float(b[0]), float(b[1]),
                                     self.rects)

    def lidar_scan(self, pose, n_rays: int = LIDAR_RAYS, max_range: float = LIDAR_RANGE,
                   robots: Optional[np.ndarray] = None) -> np.ndarray:
        """Ranges over a 270 degree fan centred on the heading.

        ``robots`` is an optional (n, 3) array of (x, y, radius) discs that
        also block rays (exclude the scanning robot itself).
        """
        if n_rays < 2:
            raise ValueError("n_rays must be >= 2")
        x, y, theta = (pose.x, pose.y, pose.theta) if isinstance(pose, Pose) else pose
        angles = theta + np.linspace(-LIDAR_FOV / 2, LIDAR_FOV / 2, n_rays)
        circles = np.zeros((0, 3)) if robots is None else np.ascontiguousarray(robots, dtype=np.float64).reshape(-1, 3)
        return kernels.ray_cast(float(x), float(y), np.ascontiguousarray(angles), float(max_range),
                                self.rects, self.length, self.width, circles)

    # -- grid helpers -----------------------------------------------------

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape

    def to_cell(self, p: Sequence[float]) -> Tuple[int, int]:
        rows, cols = self.grid.shape
        c = min(max(int(math.floor(p[0] / self.cell_size)), 0), cols - 1)
        r = min(max(int(math.floor(p[1] / self.cell_size)), 0), rows - 1)
        return r, c

    def cell_center(self, cell: Tuple[int, int]) -> Tuple[float, float]:
        return ((cell[1] + 0.5) * self.cell_size, (cell[0] + 0.5) * self.cell_size)

    def nearest_free_cell(self, p: Sequence[float]) -> Tuple[int, int]:
        """Closest free grid cell to ``p`` (ties to the lowest row-major index)."""
        r, c = self.to_cell(p)
        if not self.grid[r, c]:
            return r, c
        free = np.argwhere(self.grid == 0)
        if len(free) == 0:
            raise ArenaError("occupancy grid has no free cell")
        centers = (free[:, ::-1] + 0.5) * self.cell_size
        d2 = (centers[:, 0] - p[0]) ** 2 + (centers[:, 1] - p[1]) ** 2
        i = int(np.argmin(d2))
        return int(free[i, 0]), int(free[i, 1])

    def is_symmetric(self) -> bool:
        mine = sorted(_rect_key(o) for o in self.obstacles)
        turned = sorted(_rect_key(o.rotated(self.length, self.width)) for o in self.obstacles)
        return mine == turned


# ---------------------------------------------------------------- file I/O

def _section_number(name: str, prefix: str) -> int:
    try:
        return int(name[len(prefix) + 1:])
    except ValueError:
        raise ArenaError(f"bad section name [{name}]") from None


def load_arena(text: str, require_symmetry: bool = True, **grid_options) -> Arena:
    """Parse an arena layout (INI-style ``key = value`` sections)."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ArenaError(f"cannot parse arena layout: {exc}") from exc
    if not parser.has_section("field"):
        raise ArenaError("missing [field] section")

    def num(sec, key):
        try:
            return parser.getfloat(sec, key)
        except (configparser.Error, ValueError) as exc:
            raise ArenaError(f"[{sec}] {key}: {exc}") from exc

    length = num("field", "length")
    width = num("field", "width")
    if not (length > 0 and width > 0):
        raise ArenaError("field dimensions must be positive")

    groups = {"obstacle": [], "birth": [], "zone": []}
    for sec in parser.sections():
        if sec == "field":
            continue
        kind = sec.split(".", 1)[0]
        if kind not in groups or "." not in sec:
            raise ArenaError(f"unknown section [{sec}]")
        tag = {"obstacle": "", "birth": parser.get(sec, "team", fallback=""),
               "zone": parser.get(sec, "kind", fallback="")}[kind]
        rect = Rect(num(sec, "cx"), num(sec, "cy"), num(sec, "hx"), num(sec, "hy"),
                    parser.getfloat(sec, "height", fallback=0.0), tag)
        if rect.hx <= 0 or rect.hy <= 0:
            raise ArenaError(f"[{sec}] half-extents must be positive")
        groups[kind].append((_section_number(sec, kind), rect))

    for kind, want in (("obstacle", N_OBSTACLES), ("birth", N_BIRTH), ("zone", N_ZONES)):
        if len(groups[kind]) != want:
            raise ArenaError(f"expected {want} {kind} sections, got {len(groups[kind])}")
    for kind, items in groups.items():
        items.sort(key=lambda t: t[0])
        for _, r in items:
            if (r.cx - r.hx < -1e-12 or r.cx + r.hx > length + 1e-12
                    or r.cy - r.hy < -1e-12 or r.cy + r.hy > width + 1e-12):
                raise ArenaError(f"{kind} at ({r.cx}, {r.cy}) extends outside the field")

    arena = Arena(length, width,
                  tuple(r for _, r in groups["obstacle"]),
                  tuple(r for _, r in groups["birth"]),
                  tuple(r for _, r in groups["zone"]),
                  **grid_options)
    if require_symmetry and not arena.is_symmetric():
        raise ArenaError("obstacle layout is not symmetric under 180 degree rotation")
    return arena


def dump_arena(arena: Arena) -> str:
    """Canonical text form; ``load_arena(dump_arena(a))`` reproduces ``a``."""
    lines = [HEADER, "[field]", f"length = {arena.length!r}", f"width = {arena.width!r}"]

    def block(name, r, extra=None):
        lines.append("")
        lines.append(f"[{name}]")
        if extra:
            lines.append(f"{extra[0]} = {extra[1]}")
        lines.extend([f"cx = {r.cx!r}", f"cy = {r.cy!r}", f"hx = {r.hx!r}", f"hy = {r.hy!r}"])

    for i, o in enumerate(arena.obstacles, 1):
        block(f"obstacle.{i}", o)
        lines.append(f"height = {o.height!r}")
    for i, b in enumerate(arena.birth_areas, 1):
        block(f"birth.{i}", b, ("team", b.tag))
    for i, z in enumerate(arena.zones, 1):
        block(f"zone.{i}", z, ("kind", z.tag))
    return "\n".join(lines) + "\n"


def default_arena_text() -> str:
    return resources.files("robomarl").joinpath("data/default_arena.ini").read_text()


@functools.lru_cache(maxsize=None)
def default_arena() -> Arena:
    return load_arena(default_arena_text())
