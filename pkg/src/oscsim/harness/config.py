"""Experiment configuration: defaults, strict config-file parsing, factories.

Config files are flat key = value text grouped into [sections], one section
per subsystem (task, grid, noise, reward, policy, learn). Parsing is
strict: an unknown section or key is an error, so typos never silently
fall back to defaults. Omitted keys take the documented defaults.

Object descriptors use a compact syntax:

    shape:WxH@CX,CY[#blobseed][~coverage]

e.g. ``rectangle:20x10@32,32`` or ``blob:22x14@32,32#3~0.5``. Multiple
objects are separated by whitespace.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..env import OscEnv
from ..learn.sac import SacConfig, reward_mode_for_policy
from ..perception import NoiseModel
from ..policy import GreedyConfig
from ..reward import RewardWeights
from ..world import EnvConfig, GridSpec, ObjectSpec, ShapeKind, TaskKind

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "POLICY_KEYS",
    "default_object_sets",
    "default_config",
    "load_config",
    "parse_object",
    "parse_config_text",
]

POLICY_KEYS = ("random", "sparta_g", "objmask", "sparta_l", "sparse_l", "goaldist_l")
LEARNED_POLICIES = ("sparta_l", "sparse_l", "goaldist_l")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskKind
    policy: str = "sparta_g"
    grid: GridSpec = GridSpec(64, 64)
    objects_seen: tuple[ObjectSpec, ...] = ()
    objects_unseen: tuple[ObjectSpec, ...] = ()
    horizon: int | None = None
    episodes: int = 500
    eval_rollouts: int = 5
    seeds: tuple[int, ...] = (0, 1, 2)
    noise: NoiseModel = field(default_factory=NoiseModel)
    error_rate: float = 0.05
    num_regions: int | None = None
    weights: RewardWeights = field(default_factory=RewardWeights)
    a_max: float | None = None
    learn: SacConfig = field(default_factory=SacConfig)
    greedy_overrides: dict = field(default_factory=dict)
    matrix_policies: tuple[str, ...] = ("random", "sparta_g")
    checkpoint_dir: Path | None = None
    output_dir: Path | None = None

    def __post_init__(self):
        if self.policy not in POLICY_KEYS:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {POLICY_KEYS}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for p in self.matrix_policies:
            if p not in POLICY_KEYS:
                raise ConfigError(f"unknown matrix policy {p!r}")

    @property
    def all_objects(self) -> tuple[ObjectSpec, ...]:
        return self.objects_seen + self.objects_unseen

    def env_config(self, obj: ObjectSpec) -> EnvConfig:
        return EnvConfig(
            task=self.task,
            object=obj,
            grid=self.grid,
            a_max=self.a_max,
            horizon=self.horizon,
        )

    def make_env(self, obj: ObjectSpec, reward_mode: str | None = None) -> OscEnv:
        mode = reward_mode if reward_mode is not None else reward_mode_for_policy(self.policy)
        return OscEnv(
            self.env_config(obj),
            noise=self.noise,
            error_rate=self.error_rate,
            num_regions=self.num_regions,
            weights=self.weights,
            reward_mode=mode,
            goal_pool=self.learn.pool,
        )

    def greedy_config(self) -> GreedyConfig:
        env = self.env_config(self.objects_seen[0]) if self.objects_seen else None
        a_max = env.a_max_resolved if env else None
        return GreedyConfig.for_task(self.task, self.grid, a_max, **self.greedy_overrides)


def default_object_sets(task: TaskKind) -> tuple[tuple[ObjectSpec, ...], tuple[ObjectSpec, ...]]:
    """Canonical per-task object sets: one seen (training) object, two unseen."""
    c = (32.0, 32.0)
    if task is TaskKind.SPREAD:
        seen = (ObjectSpec(ShapeKind.RECTANGLE, c, (20.0, 10.0), name="rect-a"),)
        unseen = (
            ObjectSpec(ShapeKind.ELLIPSE, c, (22.0, 12.0), name="ellipse-a"),
            ObjectSpec(ShapeKind.BLOB, c, (22.0, 14.0), blob_seed=3, name="blob-a"),
        )
    elif task is TaskKind.MASH:
        seen = (ObjectSpec(ShapeKind.RECTANGLE, c, (30.0, 20.0), name="rect-b"),)
        unseen = (
            ObjectSpec(ShapeKind.ELLIPSE, c, (30.0, 22.0), name="ellipse-b"),
            ObjectSpec(ShapeKind.BLOB, c, (30.0, 22.0), blob_seed=5, name="blob-b"),
        )
    else:
        seen = (ObjectSpec(ShapeKind.RECTANGLE, c, (24.0, 14.0), name="rect-c"),)
        unseen = (
            ObjectSpec(ShapeKind.ELLIPSE, c, (26.0, 16.0), name="ellipse-c"),
            ObjectSpec(ShapeKind.BLOB, c, (26.0, 18.0), blob_seed=11, name="blob-c"),
        )
    return seen, unseen


def default_config(task: TaskKind, policy: str = "sparta_g", **overrides) -> ExperimentConfig:
    seen, unseen = default_object_sets(task)
    return ExperimentConfig(
        task=task,
        policy=policy,
        objects_seen=seen,
        objects_unseen=unseen,
        **overrides,
    )


_OBJECT_RE = re.compile(
    r"^(?P<shape>[a-z]+):(?P<w>[\d.]+)x(?P<h>[\d.]+)@(?P<cx>[\d.]+),(?P<cy>[\d.]+)"
    r"(?:#(?P<seed>\d+))?(?:~(?P<cov>[\d.]+))?$"
)


def parse_object(text: str, name: str = "") -> ObjectSpec:
    m = _OBJECT_RE.match(text.strip())
    if not m:
        raise ConfigError(f"bad object descriptor {text!r}")
    try:
        shape = ShapeKind(m.group("shape"))
    except ValueError:
        raise ConfigError(f"unknown shape {m.group('shape')!r} in {text!r}") from None
    return ObjectSpec(
        shape=shape,
        center=(float(m.group("cx")), float(m.group("cy"))),
        extent=(float(m.group("w")), float(m.group("h"))),
        blob_seed=int(m.group("seed") or 0),
        initial_coverage=float(m.group("cov") or 0.0),
        name=name or text.strip(),
    )


_SCHEMA = {
    "task": {
        "kind", "policy", "policies", "episodes", "horizon", "seeds",
        "eval_rollouts", "objects_seen", "objects_unseen", "initial_coverage",
        "a_max", "output_dir",
    },
    "grid": {"width", "height", "cell_size"},
    "noise": {"flip_prob", "dilate_radius", "reclassify_period", "error_rate", "num_regions"},
    "reward": {"alpha", "beta", "eta"},
    "policy": {"num_directions", "step_mag", "neighborhood_radius", "tie_break"},
    "learn": {
        "lr", "warmup_updates", "gamma", "batch", "tau", "actor_update_period",
        "target_entropy", "init_alpha", "autotune_alpha", "buffer_capacity",
        "seed_rollouts", "hidden", "pool", "utd", "checkpoint_dir",
    },
}


def _parse_sections(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA[current]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{current}]")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in section [{current}]")
        sections[current][key] = value
    return sections


def _get(sections, section, key, convert, default):
    raw = sections.get(section, {}).get(key)
    if raw is None:
        return default
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected boolean, got {raw!r}")


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.replace(",", " ").split())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(v for v in raw.replace(",", " ").split())


def _objects(raw: str) -> tuple[ObjectSpec, ...]:
    return tuple(parse_object(tok) for tok in raw.split())


def parse_config_text(text: str) -> ExperimentConfig:
    s = _parse_sections(text)

    task = _get(s, "task", "kind", TaskKind, TaskKind.SPREAD)
    grid = GridSpec(
        width=_get(s, "grid", "width", int, 64),
        height=_get(s, "grid", "height", int, 64),
        cell_size=_get(s, "grid", "cell_size", float, 1.0),
    )
    seen_default, unseen_default = default_object_sets(task)
    objects_seen = _get(s, "task", "objects_seen", _objects, seen_default)
    objects_unseen = _get(s, "task", "objects_unseen", _objects, unseen_default)
    init_cov = _get(s, "task", "initial_coverage", float, None)
    if init_cov is not None:
        objects_seen = tuple(replace(o, initial_coverage=init_cov) for o in objects_seen)
        objects_unseen = tuple(replace(o, initial_coverage=init_cov) for o in objects_unseen)

    noise = NoiseModel(
        flip_prob=_get(s, "noise", "flip_prob", float, 0.02),
        dilate_radius=_get(s, "noise", "dilate_radius", int, 1),
        reclassify_period=_get(s, "noise", "reclassify_period", int, 4),
    )
    weights = RewardWeights(
        alpha=_get(s, "reward", "alpha", float, 1.0),
        beta=_get(s, "reward", "beta", float, 1.0),
        eta=_get(s, "reward", "eta", float, 0.001),
    )
    greedy_overrides = {}
    for key, convert in (
        ("num_directions", int),
        ("step_mag", float),
        ("neighborhood_radius", float),
        ("tie_break", str),
    ):
        value = _get(s, "policy", key, convert, None)
        if value is not None:
            greedy_overrides[key] = value

    learn = SacConfig(
        lr=_get(s, "learn", "lr", float, 3e-4),
        warmup_updates=_get(s, "learn", "warmup_updates", int, 1000),
        gamma=_get(s, "learn", "gamma", float, 0.95),
        batch=_get(s, "learn", "batch", int, 256),
        tau=_get(s, "learn", "tau", float, 0.005),
        actor_update_period=_get(s, "learn", "actor_update_period", int, 10),
        target_entropy=_get(s, "learn", "target_entropy", float, -2.0),
        init_alpha=_get(s, "learn", "init_alpha", float, 0.05),
        autotune_alpha=_get(s, "learn", "autotune_alpha", _bool, True),
        buffer_capacity=_get(s, "learn", "buffer_capacity", int, 100_000),
        seed_rollouts=_get(s, "learn", "seed_rollouts", int, 5),
        hidden=_get(s, "learn", "hidden", _int_list, (256, 256)),
        pool=_get(s, "learn", "pool", int, 16),
        utd=_get(s, "learn", "utd", int, 4),
    )

    return ExperimentConfig(
        task=task,
        policy=_get(s, "task", "policy", str, "sparta_g"),
        grid=grid,
        objects_seen=objects_seen,
        objects_unseen=objects_unseen,
        horizon=_get(s, "task", "horizon", int, None),
        episodes=_get(s, "task", "episodes", int, 500),
        eval_rollouts=_get(s, "task", "eval_rollouts", int, 5),
        seeds=_get(s, "task", "seeds", _int_list, (0, 1, 2)),
        noise=noise,
        error_rate=_get(s, "noise", "error_rate", float, 0.05),
        num_regions=_get(s, "noise", "num_regions", int, None),
        weights=weights,
        a_max=_get(s, "task", "a_max", float, None),
        learn=learn,
        greedy_overrides=greedy_overrides,
        matrix_policies=_get(s, "task", "policies", _str_list, ("random", "sparta_g")),
        checkpoint_dir=_get(s, "learn", "checkpoint_dir", Path, None),
        output_dir=_get(s, "task", "output_dir", Path, None),
    )


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
