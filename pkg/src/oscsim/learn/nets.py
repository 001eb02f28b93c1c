"""Plain-numpy neural nets with exact reverse-mode gradients.

Parameters live in nested lists/dicts of float64 arrays ("trees"), so the
optimizer and target-network code can treat every network uniformly. The
backward passes are hand-derived and verified against central finite
differences in the test suite; keep any change here in sync with those
checks.
"""

from __future__ import annotations

import logging

import numpy as np

__all__ = [
    "tree_map",
    "tree_flatten",
    "Mlp",
    "TanhGaussianActor",
    "adam_init",
    "adam_step",
    "polyak",
    "LOG_STD_MIN",
    "LOG_STD_MAX",
]

log = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_LN_EPS = 1e-6
_TANH_EPS = 1e-6


def tree_map(fn, *trees):
    """Apply fn leaf-wise over parallel nested list/dict structures."""
    head = trees[0]
    if isinstance(head, dict):
        return {k: tree_map(fn, *(t[k] for t in trees)) for k in head}
    if isinstance(head, list):
        return [tree_map(fn, *(t[i] for t in trees)) for i in range(len(head))]
    return fn(*trees)


def tree_flatten(tree) -> list[np.ndarray]:
    """Leaves in deterministic (insertion/index) order."""
    out: list[np.ndarray] = []

    def rec(t):
        if isinstance(t, dict):
            for k in t:
                rec(t[k])
        elif isinstance(t, list):
            for v in t:
                rec(v)
        else:
            out.append(t)

    rec(tree)
    return out


def _linear_init(
    rng: np.random.Generator,
    fan_in: int,
    fan_out: int,
    scale: float | None = None,
    dtype=np.float64,
) -> dict:
    s = scale if scale is not None else np.sqrt(2.0 / fan_in)
    return {
        "W": rng.normal(0.0, s, size=(fan_in, fan_out)).astype(dtype),
        "b": np.zeros(fan_out, dtype=dtype),
    }


def _layernorm_forward(z, g, b):
    mu = z.mean(axis=1, keepdims=True)
    var = z.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (z - mu) * inv
    return g * xhat + b, (xhat, inv)


def _layernorm_backward(cache, g, dy):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    dz = inv * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
    )
    return dz, dg, db


class Mlp:
    """Affine chain with rectifier activations on hidden layers.

    With layer_norm=True each hidden pre-activation is normalized across
    features with learned gain/shift before the rectifier (used by the
    critics). activate_final applies the rectifier to the last layer too
    (used by the actor trunk).
    """

    def __init__(
        self,
        sizes: list[int],
        rng: np.random.Generator,
        layer_norm: bool = False,
        activate_final: bool = False,
        final_scale: float | None = None,
        dtype=np.float64,
    ):
        self.sizes = list(sizes)
        self.layer_norm = layer_norm
        self.activate_final = activate_final
        self.dtype = np.dtype(dtype)
        self.params: list[dict] = []
        n = len(sizes) - 1
        for i in range(n):
            hidden = i < n - 1 or activate_final
            scale = None if hidden else final_scale
            layer = _linear_init(rng, sizes[i], sizes[i + 1], scale, dtype)
            if layer_norm and hidden:
                layer["g"] = np.ones(sizes[i + 1], dtype=dtype)
                layer["ln_b"] = np.zeros(sizes[i + 1], dtype=dtype)
            self.params.append(layer)

    def _is_hidden(self, i: int) -> bool:
        return i < len(self.params) - 1 or self.activate_final

    def forward(self, x: np.ndarray, params: list[dict] | None = None):
        """Returns (output, cache); x has shape (batch, sizes[0])."""
        p = params if params is not None else self.params
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"input shape {x.shape} incompatible with sizes {self.sizes}")
        h = np.asarray(x, dtype=self.dtype)
        cache = []
        for i, layer in enumerate(p):
            z = h @ layer["W"] + layer["b"]
            ln_cache = None
            if self._is_hidden(i):
                if self.layer_norm:
                    z, ln_cache = _layernorm_forward(z, layer["g"], layer["ln_b"])
                out = np.maximum(z, 0.0)
            else:
                out = z
            cache.append((h, ln_cache, out))
            h = out
        return h, cache

    def backward(self, cache, dy: np.ndarray, params: list[dict] | None = None):
        """Exact gradients for a forward pass: returns (param grads, input grad)."""
        p = params if params is not None else self.params
        grads: list[dict] = [None] * len(p)
        d = dy
        for i in reversed(range(len(p))):
            h_in, ln_cache, out = cache[i]
            layer = p[i]
            g = {}
            if self._is_hidden(i):
                d = d * (out > 0.0)
                if self.layer_norm:
                    d, g["g"], g["ln_b"] = _layernorm_backward(ln_cache, layer["g"], d)
            g["W"] = h_in.T @ d
            g["b"] = d.sum(axis=0)
            # Key order must match params for tree operations.
            grads[i] = {k: g[k] for k in layer}
            d = d @ layer["W"].T
        return grads, d


class TanhGaussianActor:
    """Gaussian policy head squashed by tanh and scaled to the action bound.

    The trunk is a rectified MLP; two affine heads emit the mean and the
    clamped log standard deviation. Sampling uses the reparameterized form
    u = mean + std * noise, and log-densities include the squash correction
    sum(log(a_max * (1 - tanh(u)^2))).
    """

    def __init__(
        self,
        obs_dim: int,
        hidden: list[int],
        a_max: float,
        rng: np.random.Generator,
        action_dim: int = 2,
        dtype=np.float64,
    ):
        self.a_max = float(a_max)
        self.action_dim = action_dim
        self.dtype = np.dtype(dtype)
        self.trunk = Mlp([obs_dim, *hidden], rng, activate_final=True, dtype=dtype)
        self.params = {
            "trunk": self.trunk.params,
            "mean": _linear_init(rng, hidden[-1], action_dim, scale=1e-2, dtype=dtype),
            "log_std": _linear_init(rng, hidden[-1], action_dim, scale=1e-2, dtype=dtype),
        }

    def forward(self, x: np.ndarray, params: dict | None = None):
        p = params if params is not None else self.params
        h, trunk_cache = self.trunk.forward(x, p["trunk"])
        mean = h @ p["mean"]["W"] + p["mean"]["b"]
        raw = h @ p["log_std"]["W"] + p["log_std"]["b"]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        cache = (trunk_cache, h, raw)
        return mean, log_std, cache

    def sample(self, x: np.ndarray, rng: np.random.Generator | None = None, noise: np.ndarray | None = None):
        """Draw squashed actions; returns (action, presquash, log_prob, sample_cache)."""
        mean, log_std, cache = self.forward(x)
        if noise is None:
            if rng is None:
                raise ValueError("sample needs an rng or explicit noise")
            noise = rng.standard_normal(mean.shape).astype(self.dtype)
        std = np.exp(log_std)
        u = mean + std * noise
        t = np.tanh(u)
        action = self.a_max * t
        log_prob = self.log_prob_parts(noise, log_std, t)
        return action, u, log_prob, (cache, noise, std, u, t)

    def deterministic_action(self, x: np.ndarray) -> np.ndarray:
        mean, _, _ = self.forward(x)
        return self.a_max * np.tanh(mean)

    def log_prob_parts(self, noise: np.ndarray, log_std: np.ndarray, t: np.ndarray) -> np.ndarray:
        gauss = (-0.5 * noise**2 - log_std - 0.5 * np.log(2.0 * np.pi)).sum(axis=1)
        squash = (np.log(self.a_max) + np.log(1.0 - t**2 + _TANH_EPS)).sum(axis=1)
        return gauss - squash

    def log_prob_recompute(self, u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
        """Density of stored presquash samples under the current heads."""
        std = np.exp(log_std)
        noise = (u - mean) / std
        return self.log_prob_parts(noise, log_std, np.tanh(u))

    def backward(self, cache, d_mean: np.ndarray, d_log_std: np.ndarray, params: dict | None = None):
        """Gradients of a scalar loss given dL/dmean and dL/dlog_std (pre-clamp chain applied here)."""
        p = params if params is not None else self.params
        trunk_cache, h, raw = cache
        d_raw = d_log_std * ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX))
        g_mean = {"W": h.T @ d_mean, "b": d_mean.sum(axis=0)}
        g_log_std = {"W": h.T @ d_raw, "b": d_raw.sum(axis=0)}
        dh = d_mean @ p["mean"]["W"].T + d_raw @ p["log_std"]["W"].T
        trunk_grads, dx = self.trunk.backward(trunk_cache, dh, p["trunk"])
        return {"trunk": trunk_grads, "mean": g_mean, "log_std": g_log_std}, dx

    def grad_via_sample(self, sample_cache, d_u: np.ndarray, d_log_std_direct: np.ndarray):
        """Chain gradients arriving at the presquash sample u back to head outputs.

        u = mean + exp(log_std) * noise, so dL/dmean = dL/du and
        dL/dlog_std = dL/du * std * noise plus any direct log_std term.
        """
        cache, noise, std, _, _ = sample_cache
        d_mean = d_u
        d_log_std = d_u * std * noise + d_log_std_direct
        return cache, d_mean, d_log_std


def adam_init(params) -> dict:
    return {
        "m": tree_map(np.zeros_like, params),
        "v": tree_map(np.zeros_like, params),
        "t": 0,
    }


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8, inplace=False):
    """One Adam update; skips (with a warning) if any gradient is non-finite.

    With inplace=True the parameter and moment arrays are mutated (and also
    returned), avoiding temporaries in hot loops.
    """
    finite = all(np.all(np.isfinite(g)) for g in tree_flatten(grads))
    if not finite:
        log.warning("adam_step: non-finite gradient, skipping update")
        return params, state
    t = state["t"] + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    if inplace:

        def upd(p, m_, v_, g):
            m_ *= beta1
            m_ += (1 - beta1) * g
            v_ *= beta2
            v_ += (1 - beta2) * (g * g)
            p -= lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps)
            return p

        tree_map(upd, params, state["m"], state["v"], grads)
        state["t"] = t
        return params, state
    m = tree_map(lambda m_, g: beta1 * m_ + (1 - beta1) * g, state["m"], grads)
    v = tree_map(lambda v_, g: beta2 * v_ + (1 - beta2) * g * g, state["v"], grads)
    new_params = tree_map(
        lambda p, m_, v_: p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps),
        params,
        m,
        v,
    )
    return new_params, {"m": m, "v": v, "t": t}


def polyak(target, online, tau: float, inplace: bool = False):
    """Exponential target smoothing: target <- (1 - tau) target + tau online."""
    if inplace:

        def upd(t, o):
            t *= 1.0 - tau
            t += tau * o
            return t

        return tree_map(upd, target, online)
    return tree_map(lambda t, o: (1.0 - tau) * t + tau * o, target, online)
