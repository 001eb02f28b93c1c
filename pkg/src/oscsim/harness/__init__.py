from .config import ConfigError, ExperimentConfig, default_config, load_config, parse_object
from .episode import EpisodeLog, StepRecord, run_episode, write_episode_csv
from .experiments import (
    EfficiencyReport,
    MatrixCell,
    run_efficiency_ablation,
    run_experiment,
    run_matrix,
)
from .render import render_frame

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "parse_object",
    "EpisodeLog",
    "StepRecord",
    "run_episode",
    "write_episode_csv",
    "MatrixCell",
    "EfficiencyReport",
    "run_matrix",
    "run_experiment",
    "run_efficiency_ablation",
    "render_frame",
]
