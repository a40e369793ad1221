"""Gaussian MLP policy and value function with analytic gradients.

Two tanh hidden layers of 64 units, linear heads, and a state-independent
log standard deviation per action dimension. Gradients are hand-derived
reverse-mode expressions (no autodiff anywhere); the finite-difference
oracle in :mod:`simopt.oracles` checks them.

Observation normalization is the trainer's job: it maintains running
statistics and freezes them into :class:`PolicySnapshot`, which is the
actable artifact (raw network weights never see unnormalized inputs at
rollout time). Snapshots serialize to JSON with explicit shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .rng import make_rng

__all__ = [
    "LOG_STD_MIN",
    "LOG_STD_MAX",
    "PolicyParams",
    "ValueParams",
    "PolicySnapshot",
    "init_policy",
    "init_value",
    "forward",
    "log_prob",
    "sample_action",
    "policy_backward",
    "value_forward",
    "value_backward",
    "snapshot_action",
    "flatten_params",
    "unflatten_params",
]

LOG_STD_MIN = -2.0
LOG_STD_MAX = 2.0
OBS_CLIP = 10.0  # normalized observations are clipped to +/- this

HIDDEN = 64


@dataclass(frozen=True)
class PolicyParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray
    log_std: np.ndarray


@dataclass(frozen=True)
class ValueParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W_out: np.ndarray
    b_out: np.ndarray


@dataclass(frozen=True)
class PolicySnapshot:
    """Frozen policy: network weights plus observation normalization."""

    params: PolicyParams
    obs_mean: np.ndarray
    obs_std: np.ndarray

    def to_json_dict(self) -> dict:
        weights = {}
        for f in fields(PolicyParams):
            arr = getattr(self.params, f.name)
            weights[f.name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        return {
            "weights": weights,
            "obs_mean": self.obs_mean.tolist(),
            "obs_std": self.obs_std.tolist(),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "PolicySnapshot":
        kwargs = {}
        for name, entry in data["weights"].items():
            kwargs[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        return PolicySnapshot(
            params=PolicyParams(**kwargs),
            obs_mean=np.array(data["obs_mean"], dtype=np.float64),
            obs_std=np.array(data["obs_std"], dtype=np.float64),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(text: str) -> "PolicySnapshot":
        return PolicySnapshot.from_json_dict(json.loads(text))


def _scaled_normal(rng: np.random.Generator, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
    return rng.standard_normal((rows, cols)) * (scale / np.sqrt(cols))


def init_policy(obs_dim: int, act_dim: int, seed: int, hidden: int = HIDDEN) -> PolicyParams:
    """Scaled-Gaussian init: std 1/sqrt(fan_in), output head shrunk by 0.01."""
    rng = make_rng(seed, "policy-init")
    return PolicyParams(
        W1=_scaled_normal(rng, hidden, obs_dim),
        b1=np.zeros(hidden),
        W2=_scaled_normal(rng, hidden, hidden),
        b2=np.zeros(hidden),
        W_out=_scaled_normal(rng, act_dim, hidden, scale=0.01),
        b_out=np.zeros(act_dim),
        log_std=np.zeros(act_dim),
    )


def init_value(obs_dim: int, seed: int, hidden: int = HIDDEN) -> ValueParams:
    rng = make_rng(seed, "value-init")
    return ValueParams(
        W1=_scaled_normal(rng, hidden, obs_dim),
        b1=np.zeros(hidden),
        W2=_scaled_normal(rng, hidden, hidden),
        b2=np.zeros(hidden),
        W_out=_scaled_normal(rng, 1, hidden),
        b_out=np.zeros(1),
    )


def _mlp_forward(p, obs):
    x = np.asarray(obs, dtype=np.float64)
    h1 = np.tanh(x @ p.W1.T + p.b1)
    h2 = np.tanh(h1 @ p.W2.T + p.b2)
    out = h2 @ p.W_out.T + p.b_out
    return x, h1, h2, out


def forward(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Mean action for (normalized) observations; shape-agnostic."""
    return _mlp_forward(params, obs)[3]


def log_prob(params: PolicyParams, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density of actions under the policy."""
    mean = forward(params, obs)
    action = np.asarray(action, dtype=np.float64)
    std = np.exp(params.log_std)
    z = (action - mean) / std
    d = params.log_std.shape[0]
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(params.log_std) - 0.5 * d * np.log(2.0 * np.pi)


def sample_action(params: PolicyParams, obs: np.ndarray, rng: np.random.Generator):
    """Draw an action and its log probability."""
    mean = forward(params, obs)
    std = np.exp(params.log_std)
    action = mean + std * rng.standard_normal(mean.shape)
    return action, log_prob(params, obs, action)


def policy_backward(params: PolicyParams, obs: np.ndarray, actions: np.ndarray, coeff: np.ndarray) -> dict:
    """Gradient of sum_i coeff_i * log_prob(actions_i | obs_i) w.r.t. params.

    obs (N, obs_dim), actions (N, act_dim), coeff (N,). Returns a dict keyed
    like the PolicyParams fields.
    """
    x, h1, h2, mean = _mlp_forward(params, obs)
    actions = np.asarray(actions, dtype=np.float64)
    coeff = np.asarray(coeff, dtype=np.float64)
    std = np.exp(params.log_std)
    z = (actions - mean) / std

    # d logp / d mean = z / std; d logp / d log_std = z^2 - 1
    g_out = coeff[:, None] * z / std
    grads = {
        "W_out": g_out.T @ h2,
        "b_out": g_out.sum(axis=0),
        "log_std": ((z * z - 1.0) * coeff[:, None]).sum(axis=0),
    }
    dh2 = g_out @ params.W_out
    dz2 = dh2 * (1.0 - h2 * h2)
    grads["W2"] = dz2.T @ h1
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params.W2
    dz1 = dh1 * (1.0 - h1 * h1)
    grads["W1"] = dz1.T @ x
    grads["b1"] = dz1.sum(axis=0)
    return grads


def value_forward(params: ValueParams, obs: np.ndarray) -> np.ndarray:
    """State values, shape (N,) for (N, obs_dim) input."""
    out = _mlp_forward(params, obs)[3]
    return out[..., 0]


def value_backward(params: ValueParams, obs: np.ndarray, coeff: np.ndarray) -> dict:
    """Gradient of sum_i coeff_i * V(obs_i) w.r.t. params."""
    x, h1, h2, _ = _mlp_forward(params, obs)
    coeff = np.asarray(coeff, dtype=np.float64)
    g_out = coeff[:, None]  # (N, 1)
    grads = {
        "W_out": g_out.T @ h2,
        "b_out": g_out.sum(axis=0),
    }
    dh2 = g_out @ params.W_out
    dz2 = dh2 * (1.0 - h2 * h2)
    grads["W2"] = dz2.T @ h1
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params.W2
    dz1 = dh1 * (1.0 - h1 * h1)
    grads["W1"] = dz1.T @ x
    grads["b1"] = dz1.sum(axis=0)
    return grads


def normalize_obs(obs: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return np.clip((np.asarray(obs, dtype=np.float64) - mean) / std, -OBS_CLIP, OBS_CLIP)


def snapshot_action(
    snapshot: PolicySnapshot,
    obs: np.ndarray,
    rng: np.random.Generator | None = None,
    stochastic: bool = False,
) -> np.ndarray:
    """Action of the frozen policy on a raw observation."""
    x = normalize_obs(obs, snapshot.obs_mean, snapshot.obs_std)
    if stochastic:
        if rng is None:
            raise ValueError("stochastic action requires an rng")
        return sample_action(snapshot.params, x, rng)[0]
    return forward(snapshot.params, x)


def flatten_params(params) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...]]]]:
    """Flatten a params dataclass into one vector plus a shape manifest."""
    chunks = []
    manifest = []
    for f in fields(params):
        arr = getattr(params, f.name)
        chunks.append(arr.ravel())
        manifest.append((f.name, arr.shape))
    return np.concatenate(chunks), manifest


def unflatten_params(cls, flat: np.ndarray, manifest) -> "PolicyParams | ValueParams":
    kwargs = {}
    i = 0
    for name, shape in manifest:
        size = int(np.prod(shape)) if shape else 1
        kwargs[name] = flat[i : i + size].reshape(shape)
        i += size
    return cls(**kwargs)
