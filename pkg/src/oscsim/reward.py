"""Reward components and the transformation-coverage metric.

The dense progress term rewards the fraction of remaining actionable area
transformed since the previous observation. A sparse success bonus fires
once coverage exceeds 95%, and an entropy term (supplied by the learner,
zero for non-learned controllers) nudges action diversity. Coverage is
also the evaluation metric; evaluation computes it on ground truth,
rewards only ever see observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .perception import SpocMap, pooled_fraction
from .world import SUCCESS_THRESHOLD, CellState

__all__ = [
    "RewardWeights",
    "RewardBreakdown",
    "CoverageReport",
    "spoc_reward",
    "success_reward",
    "total_reward",
    "coverage",
    "goaldist_reward",
]


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 0.001

    def __post_init__(self):
        for v in (self.alpha, self.beta, self.eta):
            if not math.isfinite(v):
                raise ValueError(f"reward weights must be finite, got {self}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_spoc: float
    r_succ: float
    r_entropy: float
    total: float


@dataclass(frozen=True)
class CoverageReport:
    transformed_cells: int
    actionable_cells: int
    object_cells: int
    coverage: float


def _counts(m) -> tuple[int, int]:
    grid = m.grid
    trf = int(np.count_nonzero(grid == CellState.TRANSFORMED))
    act = int(np.count_nonzero(grid == CellState.ACTIONABLE))
    return trf, act


def coverage(m) -> CoverageReport:
    """Cell counts and transformed fraction of any map or world state."""
    trf, act = _counts(m)
    obj = trf + act
    if obj == 0:
        raise ValueError("coverage undefined: map has no object cells")
    return CoverageReport(trf, act, obj, trf / obj)


def spoc_reward(prev: SpocMap, cur: SpocMap) -> float:
    """Newly transformed observed area, as a fraction of the previous actionable area.

    Returns 0 when the previous map had no actionable cells left (task
    already complete). Under noisy perception the value may be negative if
    the observed transformed set shrank at a reclassification pass.
    """
    if prev.grid.shape != cur.grid.shape:
        raise ValueError("map dimensions differ")
    prev_trf, prev_act = _counts(prev)
    if prev_act == 0:
        return 0.0
    cur_trf, _ = _counts(cur)
    return (cur_trf - prev_trf) / prev_act


def success_reward(cur: SpocMap) -> float:
    """1.0 once observed coverage strictly exceeds the 95% threshold."""
    return 1.0 if coverage(cur).coverage > SUCCESS_THRESHOLD else 0.0


def total_reward(w: RewardWeights, r_spoc: float, r_succ: float, r_entropy: float) -> RewardBreakdown:
    for name, v in (("r_spoc", r_spoc), ("r_succ", r_succ), ("r_entropy", r_entropy)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite reward component {name}={v}")
    total = w.alpha * r_spoc + w.beta * r_succ + w.eta * r_entropy
    return RewardBreakdown(r_spoc=r_spoc, r_succ=r_succ, r_entropy=r_entropy, total=total)


def _goal_distance(m: SpocMap, pool: int) -> float:
    obj = m.grid != CellState.BACKGROUND
    trf = m.grid == CellState.TRANSFORMED
    return float(abs(pooled_fraction(trf, pool) - pooled_fraction(obj, pool)).mean())


def goaldist_reward(prev: SpocMap, cur: SpocMap, pool: int = 16) -> float:
    """Global goal-distance proxy reward (labeled GoalDist in all outputs).

    The signal is the decrease in mean absolute difference between the
    average-pooled transformed map and the fully transformed goal map. It
    captures whole-scene goal similarity rather than localized progress.
    """
    return _goal_distance(prev, pool) - _goal_distance(cur, pool)
