"""Soft actor-critic learner and training loop.

Twin rectified critics with per-layer normalization, a tanh-Gaussian
actor, Polyak-averaged target critics, and an entropy coefficient tuned in
log space toward a fixed target entropy. Critic updates run every
gradient step; the actor (and the entropy coefficient) update once per
`actor_update_period` critic updates. The replay buffer is seeded with a
handful of greedy-controller rollouts before training starts.
"""

from __future__ import annotations

import copy
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..env import OscEnv
from ..policy import GreedyConfig, GreedyPolicy, Observation, Policy
from ..world import Action, EnvConfig, GridSpec
from .features import encode_observation, feature_dim
from .nets import (
    Mlp,
    TanhGaussianActor,
    adam_init,
    adam_step,
    polyak,
    tree_flatten,
    tree_map,
)
from .replay import ReplayBuffer, Transition

if TYPE_CHECKING:
    from ..harness.config import ExperimentConfig

__all__ = [
    "SacConfig",
    "SacLearner",
    "LearnedPolicy",
    "sac_update",
    "seed_buffer_with_greedy",
    "train",
    "TrainResult",
    "save_checkpoint",
    "load_checkpoint",
    "reward_mode_for_policy",
]

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"OSCL"
CHECKPOINT_VERSION = 1
_TANH_EPS = 1e-6

_POLICY_REWARD_MODES = {
    "sparta_l": "dense",
    "sparse_l": "sparse",
    "goaldist_l": "goaldist",
}


def reward_mode_for_policy(policy: str) -> str:
    return _POLICY_REWARD_MODES.get(policy, "dense")


@dataclass(frozen=True)
class SacConfig:
    """Learner hyperparameters.

    lr ramps linearly over the first warmup_updates critic steps. One actor
    update (plus one entropy-coefficient update) runs per
    actor_update_period critic updates. utd is the number of critic updates
    per environment step.
    """

    lr: float = 3e-4
    warmup_updates: int = 1000
    gamma: float = 0.95
    batch: int = 256
    tau: float = 0.005
    actor_update_period: int = 10
    target_entropy: float = -2.0
    init_alpha: float = 0.05
    autotune_alpha: bool = True
    buffer_capacity: int = 100_000
    seed_rollouts: int = 5
    hidden: tuple[int, ...] = (256, 256)
    pool: int = 16
    utd: int = 4

    def __post_init__(self):
        if self.actor_update_period < 1:
            raise ValueError("actor_update_period must be >= 1")
        for name in ("lr", "gamma", "batch", "tau", "buffer_capacity", "utd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class SacLearner:
    def __init__(self, obs_dim: int, a_max: float, cfg: SacConfig, seed: int, action_dim: int = 2):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.a_max = float(a_max)
        self.action_dim = action_dim
        rng = np.random.default_rng([int(seed), 7])
        hidden = list(cfg.hidden)
        self.actor = TanhGaussianActor(obs_dim, hidden, a_max, rng, action_dim)
        self.q1 = Mlp([obs_dim + action_dim, *hidden, 1], rng, layer_norm=True, final_scale=1e-2)
        self.q2 = Mlp([obs_dim + action_dim, *hidden, 1], rng, layer_norm=True, final_scale=1e-2)
        self.q1_target = copy.deepcopy(self.q1.params)
        self.q2_target = copy.deepcopy(self.q2.params)
        self.log_alpha = np.array([np.log(cfg.init_alpha)])
        self.opt_actor = adam_init(self.actor.params)
        self.opt_q1 = adam_init(self.q1.params)
        self.opt_q2 = adam_init(self.q2.params)
        self.opt_alpha = adam_init(self.log_alpha)
        self.critic_updates = 0
        self.actor_updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def _lr(self) -> float:
        t = self.critic_updates + 1
        ramp = min(1.0, t / self.cfg.warmup_updates) if self.cfg.warmup_updates > 0 else 1.0
        return self.cfg.lr * ramp

    def act(self, features: np.ndarray, rng: np.random.Generator, deterministic: bool = False):
        """Single-observation action; returns (action, presquash, log_prob)."""
        x = np.asarray(features, dtype=np.float64)[None, :]
        if deterministic:
            a = self.actor.deterministic_action(x)[0]
            return a, np.arctanh(np.clip(a / self.a_max, -1 + 1e-9, 1 - 1e-9)), 0.0
        a, u, logp, _ = self.actor.sample(x, rng)
        return a[0], u[0], float(logp[0])

    def _q_input(self, obs: np.ndarray, squashed_unit: np.ndarray) -> np.ndarray:
        return np.concatenate([obs, squashed_unit], axis=1)

    def critic_step(self, batch: dict, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        lr = self._lr()
        obs = batch["obs"]
        next_obs = batch["next_obs"]
        a_unit = np.tanh(batch["presquash"])  # critic conditions on [-1, 1] actions
        r = batch["reward"]
        done = batch["done"]

        # Bootstrapped twin-target with entropy correction.
        next_a, _, next_logp, _ = self.actor.sample(next_obs, rng)
        tin = self._q_input(next_obs, next_a / self.a_max)
        q1t, _ = self.q1.forward(tin, self.q1_target)
        q2t, _ = self.q2.forward(tin, self.q2_target)
        soft = np.minimum(q1t[:, 0], q2t[:, 0]) - self.alpha * next_logp
        y = r + cfg.gamma * (1.0 - done) * soft

        qin = self._q_input(obs, a_unit)
        losses = []
        for net, opt_name in ((self.q1, "opt_q1"), (self.q2, "opt_q2")):
            pred, cache = net.forward(qin)
            err = pred[:, 0] - y
            losses.append(float(np.mean(err**2)))
            dpred = (2.0 * err / err.shape[0])[:, None]
            grads, _ = net.backward(cache, dpred)
            net.params, new_state = adam_step(net.params, grads, getattr(self, opt_name), lr)
            setattr(self, opt_name, new_state)

        self.q1_target = polyak(self.q1_target, self.q1.params, cfg.tau)
        self.q2_target = polyak(self.q2_target, self.q2.params, cfg.tau)
        self.critic_updates += 1
        return {"critic_loss": 0.5 * (losses[0] + losses[1]), "target_mean": float(y.mean())}

    def actor_step(self, batch: dict, rng: np.random.Generator) -> dict:
        """Maximize E[min Q(s, pi(s)) - alpha log pi]; then retune alpha."""
        lr = self._lr()
        obs = batch["obs"]
        b = obs.shape[0]
        action, u, logp, sample_cache = self.actor.sample(obs, rng)
        _, noise, std, _, t = sample_cache
        qin = self._q_input(obs, t)
        q1v, c1 = self.q1.forward(qin)
        q2v, c2 = self.q2.forward(qin)
        use_q1 = q1v[:, 0] <= q2v[:, 0]
        qmin = np.where(use_q1, q1v[:, 0], q2v[:, 0])
        alpha = self.alpha
        loss = float(np.mean(alpha * logp - qmin))

        # d(loss)/d(qmin) routes each row through whichever critic attained the min.
        dq = (-np.ones(b) / b)[:, None]
        _, dx1 = self.q1.backward(c1, dq * use_q1[:, None])
        _, dx2 = self.q2.backward(c2, dq * (~use_q1)[:, None])
        d_t = (dx1 + dx2)[:, self.obs_dim :]

        dlogp = alpha / b  # scalar per row
        # log pi depends on u through the squash correction and on log_std directly.
        d_u = dlogp * (2.0 * t * (1.0 - t**2) / (1.0 - t**2 + _TANH_EPS))
        d_u += d_t * (1.0 - t**2)
        d_log_std_direct = np.full_like(t, -dlogp)
        cache, d_mean, d_log_std = self.actor.grad_via_sample(sample_cache, d_u, d_log_std_direct)
        grads, _ = self.actor.backward(cache, d_mean, d_log_std)
        self.actor.params, self.opt_actor = adam_step(self.actor.params, grads, self.opt_actor, lr)

        if self.cfg.autotune_alpha:
            # Gradient of -log_alpha * mean(logp + target_entropy).
            d_log_alpha = np.array([-float(np.mean(logp + self.cfg.target_entropy))])
            self.log_alpha, self.opt_alpha = adam_step(self.log_alpha, d_log_alpha, self.opt_alpha, lr)
        self.actor_updates += 1
        return {"actor_loss": loss, "alpha": self.alpha, "entropy": float(-logp.mean())}

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator) -> dict:
        """One scheduled gradient step: a critic update, plus the actor every period."""
        report = self.critic_step(buffer.sample(rng, self.cfg.batch), rng)
        if self.critic_updates % self.cfg.actor_update_period == 0:
            report.update(self.actor_step(buffer.sample(rng, self.cfg.batch), rng))
        return report


def sac_update(learner: SacLearner, buffer: ReplayBuffer, rng: np.random.Generator) -> dict | None:
    """Spec'd entry point; no-op with a diagnostic when the buffer is too small."""
    if len(buffer) < learner.cfg.batch:
        log.warning("sac_update skipped: buffer %d < batch %d", len(buffer), learner.cfg.batch)
        return None
    return learner.update(buffer, rng)


class LearnedPolicy(Policy):
    """Deterministic evaluation wrapper around a trained actor."""

    def __init__(self, actor: TanhGaussianActor, grid: GridSpec, pool: int, horizon: int):
        self.actor = actor
        self.grid = grid
        self.pool = pool
        self.horizon = horizon

    def act(self, obs: Observation) -> Action:
        x = encode_observation(obs, self.grid, self.pool, self.horizon).astype(np.float64)[None, :]
        a = self.actor.deterministic_action(x)[0]
        return Action(float(a[0]), float(a[1]))


def seed_buffer_with_greedy(
    env: OscEnv,
    buffer: ReplayBuffer,
    n: int,
    pool: int,
    seed: int = 0,
    greedy_cfg: GreedyConfig | None = None,
) -> ReplayBuffer:
    """Roll out n greedy episodes and store their transitions.

    Rewards come from the environment's own reward configuration, so seeded
    transitions are indistinguishable from on-policy ones (entropy term 0).
    """
    if n <= 0:
        return buffer
    cfg = greedy_cfg or GreedyConfig.for_task(env.cfg.task, env.cfg.grid, env.a_max)
    policy = GreedyPolicy(cfg)
    horizon = env.horizon
    for i in range(n):
        ep_seed = int(seed) * 1_000_003 + 500_000 + i
        obs = env.reset(ep_seed)
        policy.reset(np.random.default_rng([ep_seed, 11]))
        feats = encode_observation(obs, env.cfg.grid, pool, horizon)
        done = False
        while not done:
            action = policy.act(obs)
            obs, breakdown, done, _ = env.step(action)
            next_feats = encode_observation(obs, env.cfg.grid, pool, horizon)
            a = np.array([action.dx, action.dy], dtype=np.float64)
            unit = np.clip(a / env.a_max, -1 + 1e-9, 1 - 1e-9)
            buffer.add(
                Transition(
                    obs=feats,
                    action=a,
                    presquash=np.arctanh(unit),
                    reward=breakdown.total,
                    next_obs=next_feats,
                    done=done,
                )
            )
            feats = next_feats
    return buffer


@dataclass
class CurveRow:
    episode: int
    env_steps: int
    coverage: float
    success: bool
    actor_loss: float
    critic_loss: float
    alpha_ent: float


@dataclass
class TrainResult:
    curve: list[CurveRow]
    learner: SacLearner
    env_steps: int = 0


def train(cfg: "ExperimentConfig", seed: int | None = None, out_dir: Path | None = None) -> TrainResult:
    """Run one training job: interleaved environment steps and gradient updates.

    The reward mode follows the configured policy key (sparta_l trains on
    the dense progress reward, sparse_l on success only, goaldist_l on the
    pooled goal-distance proxy). Per-episode ground-truth coverage is the
    learning curve. Raises RuntimeError if losses go non-finite.
    """
    base_seed = int(cfg.seeds[0] if seed is None else seed)
    sac: SacConfig = cfg.learn
    mode = reward_mode_for_policy(cfg.policy)
    env = cfg.make_env(cfg.objects_seen[0], reward_mode=mode)
    obs_dim = feature_dim(sac.pool)
    learner = SacLearner(obs_dim, env.a_max, sac, base_seed)
    buffer = ReplayBuffer(sac.buffer_capacity, obs_dim)
    seed_buffer_with_greedy(
        env, buffer, sac.seed_rollouts, sac.pool, seed=base_seed, greedy_cfg=cfg.greedy_config()
    )
    rng = np.random.default_rng([base_seed, 23])

    curve: list[CurveRow] = []
    env_steps = 0
    horizon = env.horizon
    for ep in range(cfg.episodes):
        ep_seed = base_seed * 1_000_003 + ep
        obs = env.reset(ep_seed)
        feats = encode_observation(obs, cfg.grid, sac.pool, horizon)
        done = False
        last_cov = 0.0
        success = False
        critic_losses: list[float] = []
        actor_losses: list[float] = []
        while not done:
            a, u, logp = learner.act(feats, rng)
            obs, breakdown, done, info = env.step(Action(float(a[0]), float(a[1])), log_prob=logp)
            next_feats = encode_observation(obs, cfg.grid, sac.pool, horizon)
            buffer.add(Transition(feats, np.asarray(a), np.asarray(u), breakdown.total, next_feats, done))
            feats = next_feats
            env_steps += 1
            last_cov = info.gt_coverage
            success = success or info.success
            for _ in range(sac.utd):
                report = sac_update(learner, buffer, rng)
                if report is None:
                    break
                critic_losses.append(report["critic_loss"])
                if "actor_loss" in report:
                    actor_losses.append(report["actor_loss"])
        c_loss = float(np.mean(critic_losses)) if critic_losses else 0.0
        a_loss = float(np.mean(actor_losses)) if actor_losses else 0.0
        if not (np.isfinite(c_loss) and np.isfinite(a_loss)):
            if out_dir is not None:
                save_checkpoint(Path(out_dir) / f"diverged_seed{base_seed}.oscl", learner)
            raise RuntimeError(f"training diverged at episode {ep} (losses {c_loss}, {a_loss})")
        curve.append(CurveRow(ep, env_steps, last_cov, success, a_loss, c_loss, learner.alpha))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_curve_csv(out / f"curve_{cfg.policy}_{cfg.task.value}_seed{base_seed}.csv", curve)
        save_checkpoint(out / f"{cfg.policy}_{cfg.task.value}_seed{base_seed}.oscl", learner)
    return TrainResult(curve=curve, learner=learner, env_steps=env_steps)


def write_curve_csv(path: Path, curve: list[CurveRow]) -> None:
    lines = ["episode,env_steps,coverage,success,actor_loss,critic_loss,alpha_ent"]
    for row in curve:
        lines.append(
            f"{row.episode},{row.env_steps},{row.coverage:.6f},{int(row.success)},"
            f"{row.actor_loss:.6f},{row.critic_loss:.6f},{row.alpha_ent:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _param_tree(learner: SacLearner) -> dict:
    return {
        "actor": learner.actor.params,
        "q1": learner.q1.params,
        "q2": learner.q2.params,
        "q1_target": learner.q1_target,
        "q2_target": learner.q2_target,
        "log_alpha": learner.log_alpha,
    }


def save_checkpoint(path, learner: SacLearner) -> None:
    """Binary checkpoint: magic, version, then length-prefixed float32 blobs.

    Blobs appear in declared order (actor, critics, targets, entropy
    coefficient), each prefixed with its element count.
    """
    leaves = tree_flatten(_param_tree(learner))
    out = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(leaves))]
    for leaf in leaves:
        data = np.ascontiguousarray(leaf, dtype=np.float32)
        out.append(struct.pack("<I", data.size))
        out.append(data.tobytes())
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path, obs_dim: int, a_max: float, cfg: SacConfig, seed: int = 0) -> SacLearner:
    """Rebuild a learner with the given architecture and load stored parameters."""
    buf = Path(path).read_bytes()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {buf[:4]!r}")
    version, n_blobs = struct.unpack_from("<II", buf, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    learner = SacLearner(obs_dim, a_max, cfg, seed)
    tree = _param_tree(learner)
    leaves = tree_flatten(tree)
    if n_blobs != len(leaves):
        raise ValueError(f"checkpoint has {n_blobs} blobs, architecture needs {len(leaves)}")
    off = 12
    values = []
    for leaf in leaves:
        (count,) = struct.unpack_from("<I", buf, off)
        off += 4
        if count != leaf.size:
            raise ValueError(f"blob size {count} does not match parameter size {leaf.size}")
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=off).astype(np.float64)
        values.append(arr.reshape(leaf.shape))
        off += 4 * count
    it = iter(values)
    loaded = tree_map(lambda _: next(it), tree)
    learner.actor.params = loaded["actor"]
    learner.actor.trunk.params = loaded["actor"]["trunk"]
    learner.q1.params = loaded["q1"]
    learner.q2.params = loaded["q2"]
    learner.q1_target = loaded["q1_target"]
    learner.q2_target = loaded["q2_target"]
    learner.log_alpha = loaded["log_alpha"]
    return learner
