"""Command-line entry point.

Verbs:
    run                 evaluate the configured policy, write episode CSVs
    matrix              evaluate the configured policy list across objects
    ablate-efficiency   yield-per-action comparison from partial coverage
    train               train a learner per seed, write curves + checkpoints
    render              replay one episode and write a PPM frame per step

Every verb takes --config <path> plus optional --seed and --out overrides.
Exit code is 0 on success, 1 with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from ..learn.sac import train
from ..world import TaskKind
from .config import ExperimentConfig, load_config
from .episode import run_episode
from .experiments import (
    format_matrix_table,
    make_policy,
    run_efficiency_ablation,
    run_experiment,
    run_matrix,
    write_matrix_csv,
)
from .render import render_frame

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscsim", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "matrix", "ablate-efficiency", "train", "render"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None)
    return parser


def _load(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    out = args.out or cfg.output_dir or Path("out")
    return cfg, Path(out)


def _cmd_run(args) -> int:
    cfg, out = _load(args)
    logs = run_experiment(cfg, out)
    mean = float(np.mean([log.final_gt_coverage for log in logs]))
    print(f"{cfg.policy} on {cfg.task.value}: mean final coverage {mean:.3f} over {len(logs)} episodes")
    print(f"wrote {out}/summary.csv")
    return 0


def _cmd_matrix(args) -> int:
    cfg, out = _load(args)
    out.mkdir(parents=True, exist_ok=True)
    configs = [dataclasses.replace(cfg, policy=p) for p in cfg.matrix_policies]
    cells = run_matrix(configs)
    write_matrix_csv(out / "matrix.csv", cells)
    table = format_matrix_table(cells)
    (out / "matrix.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def _cmd_ablate(args) -> int:
    cfg, out = _load(args)
    out.mkdir(parents=True, exist_ok=True)
    report = run_efficiency_ablation(cfg)
    lines = ["policy,cells_per_action"]
    lines += [f"{k},{v:.6f}" for k, v in report.cells_per_action.items()]
    lines.append(f"ratio,{report.ratio:.6f}")
    (out / "efficiency.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(report.summary())
    return 0


def _cmd_train(args) -> int:
    cfg, out = _load(args)
    for seed in cfg.seeds:
        result = train(cfg, seed=seed, out_dir=out)
        tail = result.curve[-min(100, len(result.curve)) :]
        mean = float(np.mean([r.coverage for r in tail])) if tail else 0.0
        print(
            f"seed {seed}: {len(result.curve)} episodes, {result.env_steps} env steps, "
            f"final-window coverage {mean:.3f}"
        )
    return 0


def _cmd_render(args) -> int:
    cfg, out = _load(args)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    policy = make_policy(cfg, cfg.policy, seed)
    env = cfg.make_env(cfg.all_objects[0])
    obs = env.reset(seed * 1_000_003 + 900_000)
    policy.reset(np.random.default_rng([seed * 1_000_003 + 900_000, 17]))
    render_frame(obs.cur_map, obs.ee_pos, out / "frame_000.ppm", cfg.grid.cell_size)
    done = False
    t = 0
    while not done:
        action = policy.act(obs)
        obs, _, done, _ = env.step(action)
        t += 1
        render_frame(obs.cur_map, obs.ee_pos, out / f"frame_{t:03d}.ppm", cfg.grid.cell_size)
    print(f"wrote {t + 1} frames to {out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "matrix": _cmd_matrix,
    "ablate-efficiency": _cmd_ablate,
    "train": _cmd_train,
    "render": _cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        print(f"oscsim {args.verb}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
