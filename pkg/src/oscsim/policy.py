"""Non-learned controllers and the shared policy interface.

All controllers (including the learner's evaluation wrapper) implement the
same two-method interface: `reset(rng)` at episode start and `act(obs)`
each step. The greedy controller scores a fixed fan of candidate
displacements by the count of actionable cells near each predicted
endpoint; the object-mask variant deliberately ignores the
actionable/transformed distinction and counts all object cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .perception import SpocMap
from .world import (
    L_BRUSH,
    R_MASH,
    W_BRUSH,
    W_SLICE,
    Action,
    CellState,
    GridSpec,
    TaskKind,
    default_a_max,
)

__all__ = [
    "Observation",
    "GreedyConfig",
    "greedy_action",
    "objmask_action",
    "random_action",
    "Policy",
    "RandomPolicy",
    "GreedyPolicy",
    "ObjMaskPolicy",
    "ScriptedCoveragePolicy",
    "serpentine_waypoints",
    "neighborhood_radius_for",
]

# Nominal object span (cells) used to size the slice neighborhood.
_SLICE_SPAN = 20.0


def neighborhood_radius_for(task: TaskKind) -> float:
    """Radius (cells) of a disc with roughly the task footprint's area."""
    if task is TaskKind.SPREAD:
        return math.sqrt(L_BRUSH * W_BRUSH / math.pi)
    if task is TaskKind.MASH:
        return R_MASH
    return math.sqrt(W_SLICE * _SLICE_SPAN / math.pi)


@dataclass
class Observation:
    """What a controller sees each step: current and previous maps plus proprioception."""

    cur_map: SpocMap
    prev_map: SpocMap
    ee_pos: tuple[float, float]
    step: int


@dataclass(frozen=True)
class GreedyConfig:
    """Candidate fan and scoring neighborhood for the greedy controllers."""

    grid: GridSpec
    a_max: float
    num_directions: int = 8
    step_mag: float | None = None
    neighborhood_radius: float | None = None  # cells
    tie_break: str = "lowest"  # or "random"

    def __post_init__(self):
        if self.num_directions < 2:
            raise ValueError(f"num_directions must be >= 2, got {self.num_directions}")
        if self.step_mag is not None and not 0.0 < self.step_mag <= self.a_max:
            raise ValueError(f"step_mag must be in (0, a_max], got {self.step_mag}")
        if self.neighborhood_radius is not None and self.neighborhood_radius < 1.0:
            raise ValueError(f"neighborhood_radius must be >= 1 cell, got {self.neighborhood_radius}")
        if self.tie_break not in ("lowest", "random"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")

    @classmethod
    def for_task(cls, task: TaskKind, grid: GridSpec, a_max: float | None = None, **overrides) -> "GreedyConfig":
        am = a_max if a_max is not None else default_a_max(grid)
        overrides.setdefault("neighborhood_radius", neighborhood_radius_for(task))
        return cls(grid=grid, a_max=am, **overrides)

    @property
    def step_mag_resolved(self) -> float:
        return self.step_mag if self.step_mag is not None else self.a_max

    def radius_units(self, task_fallback: float = R_MASH) -> float:
        r = self.neighborhood_radius if self.neighborhood_radius is not None else task_fallback
        return r * self.grid.cell_size


def _candidates(cfg: GreedyConfig) -> list[Action]:
    mag = cfg.step_mag_resolved
    n = cfg.num_directions
    return [
        Action(mag * math.cos(2.0 * math.pi * i / n), mag * math.sin(2.0 * math.pi * i / n))
        for i in range(n)
    ]


def _cell_points(cfg: GreedyConfig, mask: np.ndarray) -> np.ndarray:
    iy, ix = np.nonzero(mask)
    cs = cfg.grid.cell_size
    return np.stack([(ix + 0.5) * cs, (iy + 0.5) * cs], axis=1)


def _pick(counts: np.ndarray, cfg: GreedyConfig, rng: np.random.Generator | None) -> int:
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if len(tied) == 1 or cfg.tie_break == "lowest":
        return int(tied[0])
    if rng is None:
        raise ValueError("tie_break='random' requires an rng")
    return int(rng.choice(tied))


def _directional_argmax(
    obs: Observation,
    cfg: GreedyConfig,
    target_mask: np.ndarray,
    rng: np.random.Generator | None,
) -> Action:
    acts = _candidates(cfg)
    wx, wy = cfg.grid.extent
    ex, ey = obs.ee_pos
    endpoints = np.array(
        [
            (min(max(ex + a.dx, 0.0), wx), min(max(ey + a.dy, 0.0), wy))
            for a in acts
        ]
    )
    pts = _cell_points(cfg, target_mask)
    if pts.shape[0] == 0:
        return Action(0.0, 0.0)
    d = np.linalg.norm(pts[None, :, :] - endpoints[:, None, :], axis=2)
    counts = (d <= cfg.radius_units()).sum(axis=1)
    if counts.max() == 0:
        # Nothing in reach of any candidate: steer toward the nearest target cell.
        nearest = d.min(axis=1)
        return acts[int(np.argmin(nearest))]
    return acts[_pick(counts, cfg, rng)]


def greedy_action(obs: Observation, cfg: GreedyConfig, rng: np.random.Generator | None = None) -> Action:
    """Pick the candidate displacement whose endpoint sees the most actionable cells.

    Candidates are uniformly spaced directions of magnitude step_mag; the
    score is the count of actionable cells within neighborhood_radius of the
    clamped endpoint. If every count is zero, the candidate whose endpoint
    is nearest any actionable cell is returned; with no actionable cells at
    all, the zero action.
    """
    return _directional_argmax(obs, cfg, obs.cur_map.grid == CellState.ACTIONABLE, rng)


def objmask_action(obs: Observation, cfg: GreedyConfig, rng: np.random.Generator | None = None) -> Action:
    """State-change-agnostic variant of greedy_action counting all object cells."""
    return _directional_argmax(obs, cfg, obs.cur_map.grid != CellState.BACKGROUND, rng)


def random_action(rng: np.random.Generator, a_max: float) -> Action:
    """Uniform displacement over the constrained action box."""
    dx, dy = rng.uniform(-a_max, a_max, size=2)
    return Action(float(dx), float(dy))


class Policy:
    """Minimal controller interface shared by all policies."""

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def act(self, obs: Observation) -> Action:
        raise NotImplementedError


class RandomPolicy(Policy):
    def __init__(self, a_max: float):
        self.a_max = a_max
        self._rng = np.random.default_rng(0)

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def act(self, obs: Observation) -> Action:
        return random_action(self._rng, self.a_max)


class GreedyPolicy(Policy):
    def __init__(self, cfg: GreedyConfig):
        self.cfg = cfg
        self._rng = None

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def act(self, obs: Observation) -> Action:
        return greedy_action(obs, self.cfg, self._rng)


class ObjMaskPolicy(Policy):
    def __init__(self, cfg: GreedyConfig):
        self.cfg = cfg
        self._rng = None

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def act(self, obs: Observation) -> Action:
        return objmask_action(obs, self.cfg, self._rng)


class ScriptedCoveragePolicy(Policy):
    """Deterministic waypoint follower used for calibration and tests.

    Steps toward each waypoint in turn, advancing once within one cell of
    it; emits the zero action after the route is exhausted.
    """

    def __init__(self, waypoints: list[tuple[float, float]], a_max: float, cell_size: float = 1.0):
        self.waypoints = list(waypoints)
        self.a_max = a_max
        self.tol = cell_size
        self._idx = 0

    def reset(self, rng: np.random.Generator) -> None:
        self._idx = 0

    def act(self, obs: Observation) -> Action:
        ex, ey = obs.ee_pos
        while self._idx < len(self.waypoints):
            wx, wy = self.waypoints[self._idx]
            if math.hypot(wx - ex, wy - ey) > self.tol:
                break
            self._idx += 1
        if self._idx >= len(self.waypoints):
            return Action(0.0, 0.0)
        wx, wy = self.waypoints[self._idx]
        dx = min(max(wx - ex, -self.a_max), self.a_max)
        dy = min(max(wy - ey, -self.a_max), self.a_max)
        return Action(dx, dy)


def serpentine_waypoints(
    bbox: tuple[float, float, float, float],
    row_spacing: float,
    margin: float = 0.0,
) -> list[tuple[float, float]]:
    """Boustrophedon route over a bounding box: alternating full-width rows."""
    x0, y0, x1, y1 = bbox
    x0 += margin
    x1 -= margin
    rows = []
    y = y0 + row_spacing / 2
    while y < y1:
        rows.append(y)
        y += row_spacing
    pts: list[tuple[float, float]] = []
    for i, ry in enumerate(rows):
        if i % 2 == 0:
            pts += [(x0, ry), (x1, ry)]
        else:
            pts += [(x1, ry), (x0, ry)]
    return pts
