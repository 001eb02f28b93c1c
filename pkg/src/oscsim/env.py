"""Episode environment tying simulation, observation, and reward together.

One OscEnv instance owns one episode at a time: reset spawns the object and
produces the first observation; step applies a primitive, advances the
perception stream, and scores the transition. The progress component of
the reward depends on the configured mode:

- "dense":    observed newly-transformed fraction of remaining work
- "sparse":   no progress term, success bonus only
- "goaldist": pooled goal-distance proxy (GoalDist)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reward as rw
from .perception import NoiseModel, PerceptionState, SpocMap, observe
from .policy import Observation
from .reward import RewardBreakdown, RewardWeights
from .world import Action, EnvConfig, WorldState, apply_primitive, reset_episode

__all__ = ["OscEnv", "StepInfo", "REWARD_MODES"]

REWARD_MODES = ("dense", "sparse", "goaldist")


@dataclass
class StepInfo:
    cells_transformed: int
    gt_coverage: float
    obs_coverage: float
    success: bool


class OscEnv:
    def __init__(
        self,
        cfg: EnvConfig,
        noise: NoiseModel | None = None,
        error_rate: float = 0.05,
        num_regions: int | None = None,
        weights: RewardWeights | None = None,
        reward_mode: str = "dense",
        goal_pool: int = 16,
    ):
        if reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward_mode {reward_mode!r}")
        self.cfg = cfg
        self.noise = noise if noise is not None else NoiseModel()
        self.error_rate = error_rate
        self.num_regions = num_regions
        self.weights = weights if weights is not None else RewardWeights()
        self.reward_mode = reward_mode
        self.goal_pool = goal_pool
        self.world: WorldState | None = None
        self._pstate: PerceptionState | None = None
        self._cur_map: SpocMap | None = None
        self._prev_map: SpocMap | None = None

    @property
    def horizon(self) -> int:
        return self.cfg.horizon_resolved

    @property
    def a_max(self) -> float:
        return self.cfg.a_max_resolved

    def reset(self, seed: int) -> Observation:
        self.world = reset_episode(self.cfg, seed)
        self._pstate = PerceptionState.initial(
            seed, error_rate=self.error_rate, num_regions=self.num_regions
        )
        self._cur_map, self._pstate = observe(self.world, self._pstate, self.noise)
        self._prev_map = self._cur_map
        return self._observation()

    def _observation(self) -> Observation:
        return Observation(
            cur_map=self._cur_map,
            prev_map=self._prev_map,
            ee_pos=self.world.ee_pos,
            step=self.world.step,
        )

    def step(self, action: Action, log_prob: float | None = None) -> tuple[Observation, RewardBreakdown, bool, StepInfo]:
        """Apply one primitive. `log_prob` (if given) feeds the entropy term."""
        if self.world is None:
            raise RuntimeError("step before reset")
        self.world, outcome = apply_primitive(self.world, action)
        new_map, self._pstate = observe(self.world, self._pstate, self.noise)

        r_succ = rw.success_reward(new_map)
        r_ent = -log_prob if log_prob is not None else 0.0
        if self.reward_mode == "dense":
            r_prog = rw.spoc_reward(self._cur_map, new_map)
        elif self.reward_mode == "goaldist":
            r_prog = rw.goaldist_reward(self._cur_map, new_map, self.goal_pool)
        else:
            r_prog, r_ent = 0.0, 0.0
        breakdown = rw.total_reward(self.weights, r_prog, r_succ, r_ent)

        self._prev_map = self._cur_map
        self._cur_map = new_map
        done = r_succ > 0.0 or self.world.step >= self.horizon
        info = StepInfo(
            cells_transformed=outcome.cells_transformed,
            gt_coverage=rw.coverage(self.world).coverage,
            obs_coverage=rw.coverage(new_map).coverage,
            success=r_succ > 0.0,
        )
        return self._observation(), breakdown, done, info
