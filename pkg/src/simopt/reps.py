"""Episodic KL-regularized distribution update over simulation parameters.

Given sampled internal-space parameter vectors and their rollout-discrepancy
costs, the update reweights the samples by a softmax of negative cost at a
temperature set by a dual minimization, fits a Gaussian by weighted maximum
likelihood, and backtracks toward the previous distribution until the
closed-form Gaussian KL constraint holds.

The dual of the KL-constrained expected-cost minimization is

    g(eta) = eta * epsilon + eta * log( (1/N) sum_i exp(-(c_i - min c)/eta) ) + min c,

minimized over eta by golden-section search on log eta. Costs are shifted
by their minimum before exponentiation, so the update is invariant to
adding a constant to all costs.

Several update passes per outer iteration reuse the same sample set without
importance correction: each pass re-solves the dual on the unchanged costs
and chains distributions, measuring KL against its own input distribution.
The orchestrator drives that loop; :func:`update` performs a single pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .param_space import ParamDistribution, kl_divergence

__all__ = ["RepsConfig", "RepsUpdateInfo", "solve_dual", "weights", "update"]

_ETA_MAX = 1.0e6
_DUAL_ITERS = 200
_DUAL_TOL = 1.0e-6
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RepsConfig:
    epsilon: float = 1.0  # KL trust region per update pass
    eta_min: float = 0.001  # temperature floor
    updates_per_iteration: int = 3  # chained passes per outer iteration
    cov_jitter_floor: float = 1.0e-8  # added to the weighted-ML covariance
    max_backtracks: int = 20


@dataclass(frozen=True)
class RepsUpdateInfo:
    """Diagnostics of one accepted update pass."""

    eta: float
    ess: float  # effective sample size, 1 / sum w^2
    weight_kl: float  # empirical KL of weights vs uniform
    achieved_kl: float  # closed-form KL(new || old)
    step_scale: float  # backtracking interpolation factor actually used

    def as_dict(self) -> dict:
        return {
            "eta": self.eta,
            "ess": self.ess,
            "weight_kl": self.weight_kl,
            "achieved_kl": self.achieved_kl,
            "step_scale": self.step_scale,
        }


def _dual_value(delta: np.ndarray, eta: float, epsilon: float, min_cost: float) -> float:
    # log-mean-exp of -delta/eta, stable because delta >= 0
    lme = float(np.log(np.mean(np.exp(-delta / eta))))
    return eta * epsilon + eta * lme + min_cost


def solve_dual(costs: np.ndarray, epsilon: float, eta_min: float) -> float:
    """Temperature minimizing the dual, by golden-section on log eta.

    All-equal costs return eta_min by convention (the dual is then strictly
    increasing in eta).
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError("costs must be a non-empty vector")
    if not np.all(np.isfinite(costs)):
        raise ValueError("non-finite costs")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    min_cost = float(np.min(costs))
    delta = costs - min_cost
    if float(np.max(delta)) == 0.0:
        return eta_min

    lo, hi = math.log(eta_min), math.log(_ETA_MAX)
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _dual_value(delta, math.exp(c), epsilon, min_cost)
    fd = _dual_value(delta, math.exp(d), epsilon, min_cost)
    for _ in range(_DUAL_ITERS):
        if b - a < _DUAL_TOL:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _dual_value(delta, math.exp(c), epsilon, min_cost)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _dual_value(delta, math.exp(d), epsilon, min_cost)
    return math.exp(0.5 * (a + b))


def weights(costs: np.ndarray, eta: float) -> np.ndarray:
    """Normalized sample weights: softmax of -(c - min c) / eta."""
    costs = np.asarray(costs, dtype=np.float64)
    w = np.exp(-(costs - np.min(costs)) / eta)
    return w / np.sum(w)


def update(
    dist: ParamDistribution,
    samples: np.ndarray,
    costs: np.ndarray,
    config: RepsConfig,
) -> tuple[ParamDistribution, RepsUpdateInfo]:
    """One KL-constrained update pass. Returns (new distribution, info).

    ``samples`` are internal-space vectors (N, d) drawn from ``dist``;
    ``costs`` their rollout costs. The weighted-ML fit is pulled back toward
    the input distribution by halving an interpolation factor until
    KL(new || old) <= epsilon; if even the smallest step violates the
    constraint the input distribution is returned unchanged.
    """
    samples = np.asarray(samples, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] != costs.shape[0]:
        raise ValueError(f"samples {samples.shape} and costs {costs.shape} do not line up")
    if samples.shape[1] != dist.dim:
        raise ValueError(f"samples have dimension {samples.shape[1]}, distribution has {dist.dim}")

    eta = solve_dual(costs, config.epsilon, config.eta_min)
    w = weights(costs, eta)
    ess = float(1.0 / np.sum(w * w))
    weight_kl = float(np.sum(w * np.log(np.maximum(w * len(w), 1e-300))))

    mu = w @ samples
    centered = samples - mu
    cov = (centered * w[:, None]).T @ centered + config.cov_jitter_floor * np.eye(dist.dim)

    t = 1.0
    for _ in range(config.max_backtracks + 1):
        cand = ParamDistribution(
            names=dist.names,
            mean=(1.0 - t) * dist.mean + t * mu,
            covariance=(1.0 - t) * dist.covariance + t * cov,
            transforms=dist.transforms,
        )
        kl = kl_divergence(cand, dist)
        if kl <= config.epsilon:
            return cand, RepsUpdateInfo(eta, ess, weight_kl, kl, t)
        t *= 0.5
    return dist, RepsUpdateInfo(eta, ess, weight_kl, 0.0, 0.0)
