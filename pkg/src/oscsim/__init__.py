"""oscsim: deterministic 2D simulation and learning stack for progressive
object state change tasks (spreading, mashing, slicing)."""

from .env import OscEnv
from .perception import ClassifierOracle, NoiseModel, PerceptionState, SpocMap, observe
from .policy import GreedyConfig, Observation, Policy
from .reward import CoverageReport, RewardBreakdown, RewardWeights, coverage
from .world import (
    Action,
    CellState,
    EnvConfig,
    GridSpec,
    ObjectSpec,
    ShapeKind,
    TaskKind,
    WorldState,
)

__version__ = "0.1.0"

__all__ = [
    "OscEnv",
    "SpocMap",
    "NoiseModel",
    "ClassifierOracle",
    "PerceptionState",
    "observe",
    "Observation",
    "Policy",
    "GreedyConfig",
    "RewardWeights",
    "RewardBreakdown",
    "CoverageReport",
    "coverage",
    "Action",
    "CellState",
    "EnvConfig",
    "GridSpec",
    "ObjectSpec",
    "ShapeKind",
    "TaskKind",
    "WorldState",
    "__version__",
]
