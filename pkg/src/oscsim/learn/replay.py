"""Uniform replay buffer over fixed-width transitions."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = ["Transition", "ReplayBuffer"]

_HEADER = struct.Struct("<I")


@dataclass
class Transition:
    """One step of experience.

    Actions are stored both squashed (workspace units) and presquash so the
    exact sampling log-density can be recomputed later.
    """

    obs: np.ndarray  # float32 (F,)
    action: np.ndarray  # float64 (2,), squashed
    presquash: np.ndarray  # float64 (2,)
    reward: float
    next_obs: np.ndarray  # float32 (F,)
    done: bool

    def to_bytes(self) -> bytes:
        f = self.obs.shape[0]
        body = (
            self.obs.astype(np.float32).tobytes()
            + self.action.astype(np.float64).tobytes()
            + self.presquash.astype(np.float64).tobytes()
            + struct.pack("<d?", self.reward, self.done)
            + self.next_obs.astype(np.float32).tobytes()
        )
        return _HEADER.pack(f) + body

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Transition":
        (f,) = _HEADER.unpack_from(buf)
        off = _HEADER.size
        obs = np.frombuffer(buf, dtype=np.float32, count=f, offset=off).copy()
        off += 4 * f
        action = np.frombuffer(buf, dtype=np.float64, count=2, offset=off).copy()
        off += 16
        presquash = np.frombuffer(buf, dtype=np.float64, count=2, offset=off).copy()
        off += 16
        reward, done = struct.unpack_from("<d?", buf, off)
        off += struct.calcsize("<d?")
        next_obs = np.frombuffer(buf, dtype=np.float32, count=f, offset=off).copy()
        return cls(obs, action, presquash, reward, next_obs, done)


class ReplayBuffer:
    """Ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.action = np.zeros((capacity, 2), dtype=np.float64)
        self.presquash = np.zeros((capacity, 2), dtype=np.float64)
        self.reward = np.zeros(capacity, dtype=np.float64)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> None:
        i = self.pos
        self.obs[i] = tr.obs
        self.action[i] = tr.action
        self.presquash[i] = tr.presquash
        self.reward[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.done[i] = tr.done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def get(self, i: int) -> Transition:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return Transition(
            self.obs[i].copy(),
            self.action[i].copy(),
            self.presquash[i].copy(),
            float(self.reward[i]),
            self.next_obs[i].copy(),
            bool(self.done[i]),
        )

    def sample(self, rng: np.random.Generator, batch: int) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch)
        return {
            "obs": self.obs[idx].astype(np.float64),
            "action": self.action[idx],
            "presquash": self.presquash[idx],
            "reward": self.reward[idx],
            "next_obs": self.next_obs[idx].astype(np.float64),
            "done": self.done[idx].astype(np.float64),
        }

    def save(self, path) -> None:
        np.savez(
            path,
            obs=self.obs[: self.size],
            action=self.action[: self.size],
            presquash=self.presquash[: self.size],
            reward=self.reward[: self.size],
            next_obs=self.next_obs[: self.size],
            done=self.done[: self.size],
            capacity=self.capacity,
        )

    @classmethod
    def load(cls, path) -> "ReplayBuffer":
        data = np.load(path)
        buf = cls(int(data["capacity"]), data["obs"].shape[1])
        n = data["obs"].shape[0]
        buf.obs[:n] = data["obs"]
        buf.action[:n] = data["action"]
        buf.presquash[:n] = data["presquash"]
        buf.reward[:n] = data["reward"]
        buf.next_obs[:n] = data["next_obs"]
        buf.done[:n] = data["done"]
        buf.size = n
        buf.pos = n % buf.capacity
        return buf
