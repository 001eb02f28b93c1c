from .features import encode_observation, feature_dim
from .nets import Mlp, TanhGaussianActor, adam_init, adam_step, polyak
from .replay import ReplayBuffer, Transition
from .sac import (
    LearnedPolicy,
    SacConfig,
    SacLearner,
    load_checkpoint,
    sac_update,
    save_checkpoint,
    seed_buffer_with_greedy,
    train,
)

__all__ = [
    "encode_observation",
    "feature_dim",
    "Mlp",
    "TanhGaussianActor",
    "adam_init",
    "adam_step",
    "polyak",
    "ReplayBuffer",
    "Transition",
    "SacConfig",
    "SacLearner",
    "LearnedPolicy",
    "sac_update",
    "seed_buffer_with_greedy",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]
