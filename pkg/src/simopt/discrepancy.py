"""Trajectory discrepancy: smoothed, weighted L1+L2 observation distance.

The cost between two observation sequences is

    sum_t  w_l1 * |W diff~_t|_1  +  w_l2 * ||W diff~_t||_2^2

where ``diff~`` is the per-dimension Gaussian-smoothed difference, W holds
per-dimension weights, and the smoothing gives tolerance to small temporal
misalignments. ``batch_cost`` evaluates a batch of sampled simulation
parameters against one or more real (target) observation sequences with a
single deterministic-policy rollout per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import EnvSpec, rollout
from .param_space import SimParams
from .parallel import parallel_map
from .policy import PolicySnapshot
from .rng import derive_seed

__all__ = ["DiscrepancyConfig", "gaussian_smooth", "discrepancy", "batch_cost"]

BLOWUP_COST_FACTOR = 10.0


@dataclass(frozen=True)
class DiscrepancyConfig:
    """Weights and smoothing of the trajectory discrepancy.

    dim_weights covers the compared observation columns plus any stacked
    previous-step columns (appended in stack_prev order); None means all
    ones. obs_indices selects columns from the simulated observations
    before comparison, for targets that expose a masked observation set.
    sim_rollouts_per_xi > 1 averages the cost over extra derived episode
    seeds.
    """

    w_l1: float = 0.5
    w_l2: float = 1.0
    smooth_std: float = 5.0
    smooth_truncation: float = 4.0
    dim_weights: tuple[float, ...] | None = None
    stack_prev: tuple[int, ...] = ()
    obs_indices: tuple[int, ...] | None = None
    sim_rollouts_per_xi: int = 1


def gaussian_smooth(series: np.ndarray, std: float, truncation: float = 4.0) -> np.ndarray:
    """Smooth a (T,) or (T, d) series along time with a truncated Gaussian.

    The kernel has radius int(truncation * std) and is renormalized over the
    valid window at the edges, so constants are preserved everywhere. A
    radius of zero (std -> 0) returns the input unchanged.
    """
    x = np.asarray(series, dtype=np.float64)
    if std < 0:
        raise ValueError("smoothing std must be non-negative")
    radius = int(truncation * std)
    if radius == 0:
        return x.copy()
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(k * k) / (2.0 * std * std))
    t = x.shape[0]
    den = np.convolve(np.ones(t), kernel, mode="same")
    if x.ndim == 1:
        return np.convolve(x, kernel, mode="same") / den
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        out[:, j] = np.convolve(x[:, j], kernel, mode="same") / den
    return out


def _stack_prev(obs: np.ndarray, cols: tuple[int, ...]) -> np.ndarray:
    if not cols:
        return obs
    prev = obs[:, list(cols)].copy()
    prev[1:] = prev[:-1]
    return np.concatenate([obs, prev], axis=1)


def discrepancy(obs_a: np.ndarray, obs_b: np.ndarray, config: DiscrepancyConfig) -> float:
    """Smoothed weighted L1+L2 distance between two observation sequences."""
    a = np.asarray(obs_a, dtype=np.float64)
    b = np.asarray(obs_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"observation shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("observations must be (T, d) matrices")
    a = _stack_prev(a, config.stack_prev)
    b = _stack_prev(b, config.stack_prev)
    d = a.shape[1]
    if config.dim_weights is None:
        w = np.ones(d)
    else:
        w = np.asarray(config.dim_weights, dtype=np.float64)
        if w.shape != (d,):
            raise ValueError(f"dim_weights has {w.shape[0]} entries for {d} compared columns")
    diff = gaussian_smooth(a - b, config.smooth_std, config.smooth_truncation) * w
    l1 = float(np.sum(np.abs(diff)))
    l2 = float(np.sum(diff * diff))
    return config.w_l1 * l1 + config.w_l2 * l2


# module-level task so the process pool can pickle it
def _sim_obs_task(args) -> tuple[np.ndarray | None, bool]:
    spec, params, policy, seed, obs_indices = args
    traj = rollout(spec, params, policy, seed, stochastic=False)
    if traj.blown:
        return None, True
    obs = traj.observations
    if obs_indices is not None:
        obs = obs[:, list(obs_indices)]
    return obs, False


def batch_cost(
    xi_samples: list[SimParams],
    policy: PolicySnapshot,
    spec: EnvSpec,
    real_obs: list[np.ndarray],
    config: DiscrepancyConfig,
    seed: int,
    workers: int | None = 1,
) -> np.ndarray:
    """Discrepancy cost of each sampled parameter setting.

    Runs one deterministic-policy simulated rollout per sample (all with the
    caller's episode seed, so parameter identity with the real system gives
    exactly zero cost) and averages the discrepancy against every real
    observation sequence. Blown-up rollouts receive 10x the largest finite
    cost in the batch; if every rollout blows up there is no finite scale
    and the batch is an error.
    """
    if not real_obs:
        raise ValueError("need at least one real observation sequence")
    real = [np.asarray(r, dtype=np.float64) for r in real_obs]
    width = real[0].shape[1]
    for r in real:
        if r.shape[1] != width:
            raise ValueError("real observation sequences have mixed widths")

    n_extra = config.sim_rollouts_per_xi - 1
    tasks = []
    for i, xi in enumerate(xi_samples):
        tasks.append((spec, xi, policy, seed, config.obs_indices))
        for j in range(n_extra):
            tasks.append((spec, xi, policy, derive_seed(seed, "extra-rollout", i, j), config.obs_indices))
    results = parallel_map(_sim_obs_task, tasks, workers)

    per_xi = 1 + n_extra
    costs = np.empty(len(xi_samples))
    blown = np.zeros(len(xi_samples), dtype=bool)
    for i in range(len(xi_samples)):
        chunk = results[i * per_xi : (i + 1) * per_xi]
        vals = []
        for obs, was_blown in chunk:
            if was_blown:
                continue
            if obs.shape[1] != width:
                raise ValueError(
                    f"simulated observation width {obs.shape[1]} does not match real width {width}"
                )
            vals.append(np.mean([discrepancy(obs, r, config) for r in real]))
        if vals:
            costs[i] = float(np.mean(vals))
        else:
            blown[i] = True
    if np.all(blown):
        raise ValueError("every simulated rollout in the batch blew up; no finite cost scale")
    if np.any(blown):
        costs[blown] = BLOWUP_COST_FACTOR * float(np.max(costs[~blown]))
    return costs
