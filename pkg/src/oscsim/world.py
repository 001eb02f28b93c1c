"""Ground-truth planar simulation of progressive object state change.

The workspace is a rectangular grid of cells. Each cell is Background,
Actionable (object area still needing work) or Transformed (object area
already changed). Transformed is absorbing: no primitive ever reverts it.
A point end-effector moves by continuous (dx, dy) displacements; at the
resulting position a task-specific tool footprint is stamped onto the grid
and every Actionable cell under it becomes Transformed.

Conventions
-----------
- The grid array has shape (height, width), row-major. Cell (ix, iy) has
  its center at ((ix + 0.5) * cell_size, (iy + 0.5) * cell_size).
- Footprint sizes are expressed in cell units and scaled by cell_size.
- Episodes start with the end-effector one cell in from the workspace
  origin corner.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

__all__ = [
    "CellState",
    "TaskKind",
    "ShapeKind",
    "GridSpec",
    "ObjectSpec",
    "Action",
    "PrimitiveOutcome",
    "WorldState",
    "EnvConfig",
    "spawn_object",
    "reset_episode",
    "footprint_cells",
    "apply_primitive",
    "is_success",
    "states_equal",
    "grid_to_bytes",
    "grid_from_bytes",
    "default_a_max",
    "default_horizon",
]


class CellState(IntEnum):
    BACKGROUND = 0
    ACTIONABLE = 1
    TRANSFORMED = 2


class TaskKind(Enum):
    SPREAD = "spread"
    MASH = "mash"
    SLICE = "slice"


class ShapeKind(Enum):
    RECTANGLE = "rectangle"
    ELLIPSE = "ellipse"
    BLOB = "blob"


# Tool footprint sizes, in cells.
L_BRUSH = 8.0
W_BRUSH = 3.0
R_MASH = 6.0
W_SLICE = 2.0

BRUSH_CAPACITY = 2
SUCCESS_THRESHOLD = 0.95
A_MAX_FRACTION = 0.25

GRID_MAGIC = b"OSCG"
_GRID_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class GridSpec:
    """Workspace discretization: width x height cells of size cell_size."""

    width: int
    height: int
    cell_size: float = 1.0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.width}x{self.height}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    @property
    def extent(self) -> tuple[float, float]:
        return (self.width * self.cell_size, self.height * self.cell_size)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of shape (height, width) holding cell-center coords."""
        xs = (np.arange(self.width) + 0.5) * self.cell_size
        ys = (np.arange(self.height) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


def default_a_max(grid: GridSpec) -> float:
    return A_MAX_FRACTION * min(grid.extent)


def default_horizon(task: TaskKind) -> int:
    return 10 if task is TaskKind.SPREAD else 5


@dataclass(frozen=True)
class ObjectSpec:
    """Procedural object geometry placed in the workspace.

    extent is the full (width, height) of the shape in workspace units.
    Blob shapes perturb an ellipse with a seeded radial modulation, so the
    same spec yields different outlines under different episode seeds.
    initial_coverage starts that fraction of object cells Transformed,
    grown contiguously from the object corner nearest the origin.
    """

    shape: ShapeKind
    center: tuple[float, float]
    extent: tuple[float, float]
    blob_seed: int = 0
    initial_coverage: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError(f"object extent must be positive, got {self.extent}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        w, h = self.extent
        return f"{self.shape.value}-{w:g}x{h:g}"


@dataclass(frozen=True)
class Action:
    """Planar end-effector displacement in workspace units."""

    dx: float
    dy: float


@dataclass(frozen=True)
class PrimitiveOutcome:
    cells_transformed: int
    new_ee: tuple[float, float]
    footprint: frozenset


@dataclass
class WorldState:
    """Full ground-truth state of one episode."""

    grid: np.ndarray
    ee_pos: tuple[float, float]
    step: int
    task: TaskKind
    brush_charge: int
    rng: np.random.Generator
    spec: GridSpec
    a_max: float

    @property
    def object_mask(self) -> np.ndarray:
        return self.grid != CellState.BACKGROUND

    def count(self, state: CellState) -> int:
        return int(np.count_nonzero(self.grid == state))

    @property
    def n_object(self) -> int:
        return int(np.count_nonzero(self.grid != CellState.BACKGROUND))

    def object_bbox(self) -> tuple[float, float, float, float]:
        """Bounding box of object cells in workspace units, covering whole cells."""
        iy, ix = np.nonzero(self.grid != CellState.BACKGROUND)
        cs = self.spec.cell_size
        return (
            float(ix.min()) * cs,
            float(iy.min()) * cs,
            float(ix.max() + 1) * cs,
            float(iy.max() + 1) * cs,
        )


@dataclass(frozen=True)
class EnvConfig:
    """Everything the world needs to start an episode.

    The experiment layer composes one of these per (task, object) pair.
    """

    task: TaskKind
    object: ObjectSpec
    grid: GridSpec = GridSpec(64, 64)
    a_max: float | None = None
    horizon: int | None = None

    @property
    def a_max_resolved(self) -> float:
        return self.a_max if self.a_max is not None else default_a_max(self.grid)

    @property
    def horizon_resolved(self) -> int:
        return self.horizon if self.horizon is not None else default_horizon(self.task)


def _rasterize(spec: ObjectSpec, grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    X, Y = grid.cell_centers()
    cx, cy = spec.center
    w, h = spec.extent
    if spec.shape is ShapeKind.RECTANGLE:
        # Half-open bounds keep cell counts exact for whole-cell extents.
        return (X >= cx - w / 2) & (X < cx + w / 2) & (Y >= cy - h / 2) & (Y < cy + h / 2)
    if spec.shape is ShapeKind.ELLIPSE:
        return ((X - cx) / (w / 2)) ** 2 + ((Y - cy) / (h / 2)) ** 2 <= 1.0
    # Blob: ellipse radius modulated by two seeded low-frequency harmonics.
    # Modulation stays <= 1 so the blob is contained in its ellipse extent.
    k1 = int(rng.integers(2, 4))
    k2 = int(rng.integers(4, 8))
    p1, p2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
    a1 = rng.uniform(0.10, 0.20)
    a2 = rng.uniform(0.04, 0.10)
    dx = X - cx
    dy = Y - cy
    theta = np.arctan2(dy, dx)
    rad = np.hypot(dx, dy)
    a, b = w / 2, h / 2
    base = a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)
    mod = 1.0 - a1 - a2 + a1 * np.sin(k1 * theta + p1) + a2 * np.sin(k2 * theta + p2)
    return rad <= base * mod


def _grow_from_corner(mask: np.ndarray, count: int) -> np.ndarray:
    """Pick `count` object cells forming a contiguous region seeded at the corner.

    The seed is the object cell minimizing ix + iy (ties by row-major order);
    growth is breadth-first over 4-neighbors, restarting from the next
    corner-most unvisited cell if a component is exhausted.
    """
    h, w = mask.shape
    chosen = np.zeros_like(mask)
    if count <= 0:
        return chosen
    visited = np.zeros_like(mask)
    taken = 0

    def corner_cell():
        iy, ix = np.nonzero(mask & ~visited)
        if ix.size == 0:
            return None
        order = np.lexsort((ix, iy, ix + iy))
        return int(ix[order[0]]), int(iy[order[0]])

    queue: deque[tuple[int, int]] = deque()
    while taken < count:
        if not queue:
            start = corner_cell()
            if start is None:
                break
            queue.append(start)
            visited[start[1], start[0]] = True
        ix, iy = queue.popleft()
        chosen[iy, ix] = True
        taken += 1
        for nx, ny in ((ix + 1, iy), (ix, iy + 1), (ix - 1, iy), (ix, iy - 1)):
            if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and not visited[ny, nx]:
                visited[ny, nx] = True
                queue.append((nx, ny))
    return chosen


def spawn_object(spec: ObjectSpec, grid: GridSpec, seed: int) -> WorldState:
    """Rasterize the object and return a fresh episode state.

    Raises ValueError if the object does not fit inside the workspace with a
    one-cell margin, if it rasterizes to zero cells, or if initial_coverage
    is not in [0, 1).
    """
    if not 0.0 <= spec.initial_coverage < 1.0:
        raise ValueError(f"initial_coverage must be in [0, 1), got {spec.initial_coverage}")
    rng = np.random.default_rng([int(seed), int(spec.blob_seed)])
    mask = _rasterize(spec, grid, rng)
    n_obj = int(np.count_nonzero(mask))
    if n_obj == 0:
        raise ValueError(f"object {spec.label} rasterizes to zero cells on {grid.width}x{grid.height} grid")
    border = mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any()
    if border:
        raise ValueError(
            f"object {spec.label} (center {spec.center}, extent {spec.extent}) "
            "touches the workspace border; a one-cell margin is required"
        )
    cells = np.full(mask.shape, CellState.BACKGROUND, dtype=np.uint8)
    cells[mask] = CellState.ACTIONABLE
    n_seed = int(round(spec.initial_coverage * n_obj))
    if n_seed:
        cells[_grow_from_corner(mask, n_seed)] = CellState.TRANSFORMED

    cs = grid.cell_size
    # This task kind is provisional; reset_episode sets the real one.
    return WorldState(
        grid=cells,
        ee_pos=(cs, cs),
        step=0,
        task=TaskKind.SPREAD,
        brush_charge=BRUSH_CAPACITY,
        rng=rng,
        spec=grid,
        a_max=default_a_max(grid),
    )


def reset_episode(config: EnvConfig, seed: int) -> WorldState:
    """Fresh spawn with the end-effector at the fixed start corner."""
    state = spawn_object(config.object, config.grid, seed)
    cs = config.grid.cell_size
    return replace(
        state,
        task=config.task,
        brush_charge=BRUSH_CAPACITY if config.task is TaskKind.SPREAD else 0,
        ee_pos=(cs, cs),
        a_max=config.a_max_resolved,
    )


def _unit_direction(dx: float, dy: float) -> tuple[float, float]:
    n = float(np.hypot(dx, dy))
    if n == 0.0:
        return (1.0, 0.0)
    return (dx / n, dy / n)


def footprint_cells(
    task: TaskKind,
    pos: tuple[float, float],
    direction: tuple[float, float],
    grid: GridSpec,
    brush_charge: int = BRUSH_CAPACITY,
    object_bbox: tuple[float, float, float, float] | None = None,
) -> set[tuple[int, int]]:
    """Cells touched by one primitive at `pos` moving along `direction`.

    Returns a set of (ix, iy) cell indices.

    - spread: a thin stroke of length L_BRUSH and width W_BRUSH cells,
      starting at pos and extending along the motion direction. A depleted
      brush (charge 0) paints a stroke of half length.
    - mash: a disc of radius R_MASH cells centered at pos.
    - slice: a strip W_SLICE cells thick perpendicular to the motion,
      spanning the object bounding box (the whole workspace if no bbox is
      given).

    A zero direction vector falls back to +x.
    """
    ux, uy = _unit_direction(*direction)
    px, py = pos
    cs = grid.cell_size
    X, Y = grid.cell_centers()
    if task is TaskKind.SPREAD:
        length = (L_BRUSH if brush_charge > 0 else L_BRUSH / 2) * cs
        half_w = W_BRUSH * cs / 2
        u = (X - px) * ux + (Y - py) * uy
        v = -(X - px) * uy + (Y - py) * ux
        mask = (u >= 0) & (u <= length) & (np.abs(v) <= half_w)
    elif task is TaskKind.MASH:
        mask = np.hypot(X - px, Y - py) <= R_MASH * cs
    else:
        u = (X - px) * ux + (Y - py) * uy
        mask = np.abs(u) <= W_SLICE * cs / 2
        if object_bbox is not None:
            x0, y0, x1, y1 = object_bbox
            mask &= (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    iy, ix = np.nonzero(mask)
    return set(zip(ix.tolist(), iy.tolist()))


def apply_primitive(state: WorldState, action: Action) -> tuple[WorldState, PrimitiveOutcome]:
    """Move the end-effector and stamp the task footprint at the new position.

    Action components are clamped to [-a_max, a_max] and the resulting
    position to the workspace. Only Actionable cells under the footprint
    change; they become Transformed. For spread, the brush loses one unit
    of charge per stroke and is refilled every second step.
    """
    am = state.a_max
    dx = float(np.clip(action.dx, -am, am))
    dy = float(np.clip(action.dy, -am, am))
    ex, ey = state.ee_pos
    wx, wy = state.spec.extent
    new_ee = (float(np.clip(ex + dx, 0.0, wx)), float(np.clip(ey + dy, 0.0, wy)))
    direction = _unit_direction(dx, dy)

    charge = state.brush_charge
    if state.task is TaskKind.SPREAD:
        charge = max(0, charge - 1)
    bbox = state.object_bbox() if state.task is TaskKind.SLICE else None
    fp = footprint_cells(state.task, new_ee, direction, state.spec, charge, bbox)

    new_grid = state.grid.copy()
    transformed = 0
    if fp:
        ixs = np.fromiter((c[0] for c in fp), dtype=np.intp, count=len(fp))
        iys = np.fromiter((c[1] for c in fp), dtype=np.intp, count=len(fp))
        hit = new_grid[iys, ixs] == CellState.ACTIONABLE
        new_grid[iys[hit], ixs[hit]] = CellState.TRANSFORMED
        transformed = int(np.count_nonzero(hit))

    new_step = state.step + 1
    if state.task is TaskKind.SPREAD and new_step % 2 == 0:
        charge = BRUSH_CAPACITY

    outcome = PrimitiveOutcome(
        cells_transformed=transformed,
        new_ee=new_ee,
        footprint=frozenset(fp),
    )
    new_state = replace(
        state,
        grid=new_grid,
        ee_pos=new_ee,
        step=new_step,
        brush_charge=charge,
    )
    return new_state, outcome


def is_success(state: WorldState) -> bool:
    """True once more than 95% of object cells are Transformed."""
    trf = state.count(CellState.TRANSFORMED)
    act = state.count(CellState.ACTIONABLE)
    if trf + act == 0:
        raise ValueError("state has no object cells")
    return trf / (trf + act) > SUCCESS_THRESHOLD


def states_equal(a: WorldState, b: WorldState) -> bool:
    """Bit-for-bit equality, including generator state."""
    return (
        a.grid.shape == b.grid.shape
        and bool(np.array_equal(a.grid, b.grid))
        and a.ee_pos == b.ee_pos
        and a.step == b.step
        and a.task == b.task
        and a.brush_charge == b.brush_charge
        and a.spec == b.spec
        and a.a_max == b.a_max
        and a.rng.bit_generator.state == b.rng.bit_generator.state
    )


def grid_to_bytes(grid: np.ndarray) -> bytes:
    """Serialize a cell grid: 16-byte header then row-major cell bytes."""
    h, w = grid.shape
    header = _GRID_HEADER.pack(GRID_MAGIC, w, h, 0)
    return header + np.ascontiguousarray(grid, dtype=np.uint8).tobytes()


def grid_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < _GRID_HEADER.size:
        raise ValueError("grid buffer too short for header")
    magic, w, h, _ = _GRID_HEADER.unpack_from(buf)
    if magic != GRID_MAGIC:
        raise ValueError(f"bad grid magic {magic!r}")
    body = buf[_GRID_HEADER.size :]
    if len(body) != w * h:
        raise ValueError(f"grid body has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()
