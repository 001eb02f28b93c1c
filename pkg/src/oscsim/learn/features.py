"""Observation encoding: pooled affordance channels plus proprioception.

Each map contributes two pooled channels (actionable fraction, transformed
fraction) at pool x pool resolution; current and previous maps are
concatenated, followed by the normalized end-effector position and the
episode progress step/horizon. Every feature lies in [0, 1].
"""

from __future__ import annotations

import numpy as np

from ..perception import pooled_fraction
from ..policy import Observation
from ..world import CellState, GridSpec

__all__ = ["encode_observation", "feature_dim"]


def feature_dim(pool: int) -> int:
    return 4 * pool * pool + 3


def _map_channels(grid: np.ndarray, pool: int) -> np.ndarray:
    act = pooled_fraction(grid == CellState.ACTIONABLE, pool)
    trf = pooled_fraction(grid == CellState.TRANSFORMED, pool)
    return np.concatenate([act.ravel(), trf.ravel()])


def encode_observation(obs: Observation, grid: GridSpec, pool: int = 16, horizon: int = 10) -> np.ndarray:
    """Flatten an observation to a float32 feature vector."""
    wx, wy = grid.extent
    parts = [
        _map_channels(obs.cur_map.grid, pool),
        _map_channels(obs.prev_map.grid, pool),
        np.array([obs.ee_pos[0] / wx, obs.ee_pos[1] / wy]),
        np.array([min(obs.step / horizon, 1.0)]),
    ]
    return np.concatenate(parts).astype(np.float32)
