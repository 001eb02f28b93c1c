"""Experiment drivers: evaluation matrix, efficiency ablation, single runs."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..learn.features import feature_dim
from ..learn.sac import LearnedPolicy, load_checkpoint
from ..policy import GreedyPolicy, ObjMaskPolicy, Policy, RandomPolicy
from ..world import ObjectSpec, TaskKind
from .config import LEARNED_POLICIES, ExperimentConfig
from .episode import EpisodeLog, run_episode, write_episode_csv

__all__ = [
    "MatrixCell",
    "EfficiencyReport",
    "make_policy",
    "checkpoint_path",
    "run_matrix",
    "run_experiment",
    "run_efficiency_ablation",
    "write_matrix_csv",
    "format_matrix_table",
]


def checkpoint_path(cfg: ExperimentConfig, policy: str, seed: int) -> Path:
    base = cfg.checkpoint_dir if cfg.checkpoint_dir is not None else Path("checkpoints")
    return Path(base) / f"{policy}_{cfg.task.value}_seed{seed}.oscl"


def make_policy(cfg: ExperimentConfig, policy: str, seed: int = 0) -> Policy:
    """Instantiate a controller by its config key.

    Learned policies load the per-seed checkpoint and act deterministically;
    a missing checkpoint raises FileNotFoundError (the matrix treats that as
    a skipped cell).
    """
    env_cfg = cfg.env_config(cfg.all_objects[0])
    a_max = env_cfg.a_max_resolved
    if policy == "random":
        return RandomPolicy(a_max)
    if policy == "sparta_g":
        return GreedyPolicy(cfg.greedy_config())
    if policy == "objmask":
        return ObjMaskPolicy(cfg.greedy_config())
    if policy in LEARNED_POLICIES:
        path = checkpoint_path(cfg, policy, seed)
        if not path.exists():
            raise FileNotFoundError(path)
        learner = load_checkpoint(path, feature_dim(cfg.learn.pool), a_max, cfg.learn, seed)
        return LearnedPolicy(learner.actor, cfg.grid, cfg.learn.pool, env_cfg.horizon_resolved)
    raise ValueError(f"unknown policy key {policy!r}")


def _eval_seed(seed: int, rollout: int) -> int:
    return seed * 1_000_003 + 900_000 + rollout


def evaluate_cell(cfg: ExperimentConfig, policy_key: str, obj: ObjectSpec) -> list[float] | None:
    """Final ground-truth coverage for seeds x rollouts; None if a checkpoint is missing."""
    coverages: list[float] = []
    for seed in cfg.seeds:
        try:
            policy = make_policy(cfg, policy_key, seed)
        except FileNotFoundError:
            return None
        env = cfg.make_env(obj)
        for rollout in range(cfg.eval_rollouts):
            log = run_episode(env, policy, _eval_seed(seed, rollout))
            coverages.append(log.final_gt_coverage)
    return coverages


@dataclass
class MatrixCell:
    task: str
    object_label: str
    policy: str
    mean: float | None
    std: float | None
    n: int


def run_matrix(configs: list[ExperimentConfig]) -> list[MatrixCell]:
    """Evaluate each config's policy over its task's object set.

    Every cell reports mean and standard deviation of final ground-truth
    coverage over seeds x rollouts; missing checkpoints leave a skipped
    cell marker (n = 0).
    """
    cells: list[MatrixCell] = []
    for cfg in configs:
        for obj in cfg.all_objects:
            values = evaluate_cell(cfg, cfg.policy, obj)
            if values is None:
                cells.append(MatrixCell(cfg.task.value, obj.label, cfg.policy, None, None, 0))
            else:
                arr = np.asarray(values)
                cells.append(
                    MatrixCell(
                        cfg.task.value,
                        obj.label,
                        cfg.policy,
                        float(arr.mean()),
                        float(arr.std()),
                        len(values),
                    )
                )
    return cells


def write_matrix_csv(path, cells: list[MatrixCell]) -> None:
    lines = ["task,object,policy,mean,std,n"]
    for c in cells:
        mean = f"{c.mean:.6f}" if c.mean is not None else ""
        std = f"{c.std:.6f}" if c.std is not None else ""
        lines.append(f"{c.task},{c.object_label},{c.policy},{mean},{std},{c.n}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_matrix_table(cells: list[MatrixCell]) -> str:
    headers = ("task", "object", "policy", "mean", "std", "n")
    rows = [
        (
            c.task,
            c.object_label,
            c.policy,
            f"{c.mean:.3f}" if c.mean is not None else "-",
            f"{c.std:.3f}" if c.std is not None else "-",
            str(c.n),
        )
        for c in cells
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*r) for r in rows]
    return "\n".join(out) + "\n"


@dataclass
class EfficiencyReport:
    cells_per_action: dict[str, float]
    ratio: float
    episodes: int

    def summary(self) -> str:
        parts = [f"{k}: {v:.2f} cells/action" for k, v in self.cells_per_action.items()]
        return f"{'; '.join(parts)}; ratio {self.ratio:.2f} over {self.episodes} episodes"


def run_efficiency_ablation(
    cfg: ExperimentConfig,
    initial_coverage: float = 0.5,
    policies: tuple[str, str] = ("sparta_g", "objmask"),
    episodes: int = 30,
) -> EfficiencyReport:
    """Yield-per-action comparison on partially transformed objects.

    Each policy runs the same seeded episodes over the task's object set
    with the requested starting coverage; the report is newly transformed
    ground-truth cells per executed action, aggregated over all episodes,
    plus the ratio of the first policy's yield to the second's.
    """
    objects = [replace(o, initial_coverage=initial_coverage) for o in cfg.all_objects]
    yields: dict[str, float] = {}
    for key in policies:
        cells = 0
        actions = 0
        for ep in range(episodes):
            obj = objects[ep % len(objects)]
            env = cfg.make_env(obj)
            policy = make_policy(cfg, key, seed=cfg.seeds[0])
            log = run_episode(env, policy, seed=31_000 + ep)
            cells += log.total_cells_transformed
            actions += len(log)
        yields[key] = cells / max(actions, 1)
    ratio = yields[policies[0]] / max(yields[policies[1]], 1e-12)
    return EfficiencyReport(cells_per_action=yields, ratio=ratio, episodes=episodes)


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> list[EpisodeLog]:
    """The `run` verb: evaluate cfg.policy on the seen object, log every episode.

    Writes one CSV per (seed, rollout) episode plus a summary CSV of final
    coverages.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obj = cfg.all_objects[0]
    logs: list[EpisodeLog] = []
    summary = ["seed,rollout,steps,success,final_coverage"]
    for seed in cfg.seeds:
        policy = make_policy(cfg, cfg.policy, seed)
        env = cfg.make_env(obj)
        for rollout in range(cfg.eval_rollouts):
            log = run_episode(env, policy, _eval_seed(seed, rollout))
            logs.append(log)
            write_episode_csv(out / f"episode_s{seed}_r{rollout}.csv", log)
            summary.append(
                f"{seed},{rollout},{len(log)},{int(log.success)},{log.final_gt_coverage:.6f}"
            )
    (out / "summary.csv").write_text("\n".join(summary) + "\n", encoding="utf-8")
    return logs
