"""Seeded episode runner and its CSV log format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..env import OscEnv
from ..policy import Policy
from ..reward import RewardBreakdown
from ..world import Action

__all__ = ["StepRecord", "EpisodeLog", "run_episode", "write_episode_csv", "episode_csv_text"]

EPISODE_CSV_HEADER = "step,r_spoc,r_succ,r_entropy,total,coverage"


@dataclass
class StepRecord:
    step: int
    action: Action
    breakdown: RewardBreakdown
    obs_coverage: float
    gt_coverage: float
    cells_transformed: int


@dataclass
class EpisodeLog:
    records: list[StepRecord]
    seed: int
    success: bool

    @property
    def final_gt_coverage(self) -> float:
        return self.records[-1].gt_coverage if self.records else 0.0

    @property
    def total_cells_transformed(self) -> int:
        return sum(r.cells_transformed for r in self.records)

    def __len__(self) -> int:
        return len(self.records)


def run_episode(env: OscEnv, policy: Policy, seed: int) -> EpisodeLog:
    """Roll one episode: reset, then observe / act / apply / score until done.

    The step-0 observation duplicates as its own previous map. Episodes end
    at observed success or at the horizon.
    """
    obs = env.reset(seed)
    policy.reset(np.random.default_rng([int(seed), 17]))
    records: list[StepRecord] = []
    success = False
    done = False
    while not done:
        action = policy.act(obs)
        obs, breakdown, done, info = env.step(action)
        records.append(
            StepRecord(
                step=obs.step,
                action=action,
                breakdown=breakdown,
                obs_coverage=info.obs_coverage,
                gt_coverage=info.gt_coverage,
                cells_transformed=info.cells_transformed,
            )
        )
        success = success or info.success
    return EpisodeLog(records=records, seed=seed, success=success)


def episode_csv_text(log: EpisodeLog) -> str:
    """Per-step reward breakdown and ground-truth coverage, one row per step."""
    lines = [EPISODE_CSV_HEADER]
    for r in log.records:
        b = r.breakdown
        lines.append(
            f"{r.step},{b.r_spoc:.6f},{b.r_succ:.6f},{b.r_entropy:.6f},"
            f"{b.total:.6f},{r.gt_coverage:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_episode_csv(path, log: EpisodeLog) -> None:
    Path(path).write_text(episode_csv_text(log), encoding="utf-8")
