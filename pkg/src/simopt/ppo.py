"""Clipped-surrogate policy optimization with GAE and analytic gradients.

The trainer collects one fixed-length episode per agent each iteration,
stepping all agents in lockstep through the vectorized environment cores.
Simulation parameters are redrawn per episode from the current parameter
distribution. Observations are normalized by running statistics that are
frozen into every policy snapshot.

Everything here is plain numpy; gradients come from the closed-form
backward passes in :mod:`simopt.policy`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .envs.core import EnvSpec
from .envs.drawer import drawer_init_state, drawer_observe, drawer_step_core
from .envs.peg import peg_init_state, peg_observe, peg_step_core
from .param_space import ParamDistribution, sample
from .policy import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    PolicyParams,
    PolicySnapshot,
    ValueParams,
    forward,
    init_policy,
    init_value,
    log_prob,
    normalize_obs,
    policy_backward,
    value_backward,
    value_forward,
)
from .rng import derive_seed, make_rng

__all__ = [
    "PpoConfig",
    "RunningStat",
    "AdamState",
    "TrainResult",
    "compute_gae",
    "normalize_advantages",
    "clipped_surrogate",
    "adam_init",
    "adam_step",
    "ppo_update",
    "train",
]


@dataclass(frozen=True)
class PpoConfig:
    n_iterations: int = 200
    n_agents: int = 32
    epochs: int = 5
    minibatch_size: int = 2400  # half the default 32x150 batch, 2 steps per epoch
    step_size: float = 5.0e-4
    clip_ratio: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    desired_kl: float = 0.01  # epoch loop stops when mean KL passes 1.5x this
    entropy_coef: float = 0.0
    segment_length: int = 0  # shuffle granularity; 0 shuffles single steps

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError(f"clip_ratio must be in (0, 1), got {self.clip_ratio}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must be in (0, 1], got {self.lam}")
        if self.step_size <= 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")


@dataclass
class RunningStat:
    """Streaming mean/variance over observation rows (parallel Welford merge)."""

    count: float
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def fresh(cls, dim: int) -> "RunningStat":
        # unit prior variance so the very first batch is not divided by ~0
        return cls(1.0, np.zeros(dim), np.ones(dim))

    def update(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, self.mean.shape[0])
        n = rows.shape[0]
        if n == 0:
            return
        b_mean = rows.mean(axis=0)
        b_m2 = ((rows - b_mean) ** 2).sum(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta**2 * (self.count * n / total)
        self.count = total

    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.m2 / self.count, 1.0e-12))

    def copy(self) -> "RunningStat":
        return RunningStat(self.count, self.mean.copy(), self.m2.copy())


def compute_gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float):
    """Generalized advantage estimates and returns.

    ``values`` has one more row than ``rewards``; the extra row is the
    bootstrap value of the state after the last step. Accepts (T,) or (T, B)
    inputs. Returns (advantages, returns) where returns = advantages +
    values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(f"values must have {rewards.shape[0] + 1} rows, got {values.shape[0]}")
    adv = np.zeros_like(rewards)
    carry = np.zeros_like(rewards[0] if rewards.ndim > 1 else np.float64(0.0))
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        carry = delta + gamma * lam * carry
        adv[t] = carry
    return adv, adv + values[:-1]


# --- Adam ----------------------------------------------------------------

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1.0e-8


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int


def _param_dict(params) -> dict:
    return {f.name: getattr(params, f.name) for f in fields(params)}


def adam_init(params) -> AdamState:
    d = _param_dict(params)
    return AdamState(
        m={k: np.zeros_like(v) for k, v in d.items()},
        v={k: np.zeros_like(v) for k, v in d.items()},
        t=0,
    )


def adam_step(params, grads: dict, state: AdamState, lr: float):
    """One descent step on each array field. Returns (params', state')."""
    t = state.t + 1
    new_m, new_v, new_p = {}, {}, {}
    bias1 = 1.0 - _ADAM_BETA1**t
    bias2 = 1.0 - _ADAM_BETA2**t
    for k, p in _param_dict(params).items():
        g = grads[k]
        m = _ADAM_BETA1 * state.m[k] + (1.0 - _ADAM_BETA1) * g
        v = _ADAM_BETA2 * state.v[k] + (1.0 - _ADAM_BETA2) * g * g
        new_m[k], new_v[k] = m, v
        new_p[k] = p - lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)
    return replace(params, **new_p), AdamState(new_m, new_v, t)


# --- PPO update ----------------------------------------------------------


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Batch-standardize advantages (mean 0, std 1, guarded for flat input)."""
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / max(float(adv.std()), 1.0e-8)


def clipped_surrogate(ratio: np.ndarray, adv: np.ndarray, clip: float):
    """Per-sample clipped surrogate min(ratio*adv, clip(ratio)*adv).

    Returns (surrogate, active) where ``active`` marks samples whose
    unclipped branch attains the min, i.e. the only samples whose ratio
    receives gradient.
    """
    ratio = np.asarray(ratio, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    swung = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    raw = ratio * adv
    active = raw <= swung
    return np.minimum(raw, swung), active


def _minibatch_order(n: int, segment_length: int, rng: np.random.Generator) -> np.ndarray:
    if segment_length <= 1:
        return rng.permutation(n)
    starts = np.arange(0, n, segment_length)
    order = rng.permutation(len(starts))
    return np.concatenate([np.arange(starts[i], min(starts[i] + segment_length, n)) for i in order])


def _grads_finite(grads: dict) -> bool:
    return all(np.all(np.isfinite(g)) for g in grads.values())


def ppo_update(
    policy: PolicyParams,
    value: ValueParams,
    policy_opt: AdamState,
    value_opt: AdamState,
    batch: dict,
    config: PpoConfig,
    rng: np.random.Generator,
):
    """Run the epoch/minibatch loop on one collected batch.

    ``batch`` holds normalized observations ("obs"), actions ("act"), the
    behavior log-probabilities ("logp"), normalized advantages ("adv") and
    value targets ("ret"). Returns (policy, value, policy_opt, value_opt,
    metrics). A non-finite loss or gradient aborts the whole update with a
    warning and returns the inputs unchanged.
    """
    obs, act = batch["obs"], batch["act"]
    logp_old, adv, ret = batch["logp"], batch["adv"], batch["ret"]
    n = obs.shape[0]
    orig = (policy, value, policy_opt, value_opt)
    clip = config.clip_ratio
    kl = 0.0
    epochs_run = 0

    for _ in range(config.epochs):
        order = _minibatch_order(n, config.segment_length, rng)
        for lo in range(0, n, config.minibatch_size):
            mb = order[lo : lo + config.minibatch_size]
            o, a = obs[mb], act[mb]
            ratio = np.exp(log_prob(policy, o, a) - logp_old[mb])
            _, active = clipped_surrogate(ratio, adv[mb], clip)
            coeff = np.where(active, ratio * adv[mb], 0.0) / mb.size
            grads = policy_backward(policy, o, a, coeff)
            grads["log_std"] = grads["log_std"] + config.entropy_coef
            verr = value_forward(value, o) - ret[mb]
            vgrads = value_backward(value, o, verr / mb.size)
            if not (_grads_finite(grads) and _grads_finite(vgrads)):
                warnings.warn("non-finite gradient, discarding this policy update")
                return (*orig, {"kl": float("nan"), "aborted": True})
            # ascent on the surrogate, descent on the value error
            policy, policy_opt = adam_step(
                policy, {k: -g for k, g in grads.items()}, policy_opt, config.step_size
            )
            policy = replace(policy, log_std=np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX))
            value, value_opt = adam_step(value, vgrads, value_opt, config.step_size)
        epochs_run += 1
        kl = float(np.mean(logp_old - log_prob(policy, obs, act)))
        if not np.isfinite(kl):
            warnings.warn("non-finite policy KL, discarding this policy update")
            return (*orig, {"kl": float("nan"), "aborted": True})
        if kl > 1.5 * config.desired_kl:
            break

    ratio = np.exp(log_prob(policy, obs, act) - logp_old)
    verr = value_forward(value, obs) - ret
    surrogate, _ = clipped_surrogate(ratio, adv, clip)
    metrics = {
        "kl": kl,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip)),
        "surrogate": float(np.mean(surrogate)),
        "value_loss": float(np.mean(verr**2)),
        "epochs_run": epochs_run,
        "aborted": False,
    }
    return policy, value, policy_opt, value_opt, metrics


# --- training loop -------------------------------------------------------


@dataclass
class TrainResult:
    snapshot: PolicySnapshot  # best-by-mean-reward policy with frozen normalization
    best_iteration: int
    best_reward: float
    curve: np.ndarray  # mean episode reward per iteration
    metrics: list  # per-iteration dicts: iteration, mean_reward, kl, clip_fraction
    final_policy: PolicyParams
    final_value: ValueParams
    normalizer: RunningStat


def _collect(spec, dist, policy, stat, config, seed, it):
    """One lockstep rollout of all agents. Returns the raw batch arrays."""
    c = spec.constants
    t_max, n_agents = spec.episode_length, config.n_agents
    step_core = drawer_step_core if spec.task == "drawer" else peg_step_core
    obs_fn = drawer_observe if spec.task == "drawer" else peg_observe

    xi = sample(dist, n_agents, derive_seed(seed, "xi", it))
    p = np.stack([s.values for s in xi])
    jitter = np.stack(
        [
            make_rng(derive_seed(seed, "episode", it, b), "reset").uniform(
                -c.init_jitter, c.init_jitter, 2
            )
            for b in range(n_agents)
        ]
    )
    if spec.task == "drawer":
        state = drawer_init_state(c, jitter)
    else:
        state = peg_init_state(c, p, jitter)

    act_rng = make_rng(seed, "collect", it)
    obs_raw = np.zeros((t_max + 1, n_agents, spec.obs_dim))
    act = np.zeros((t_max, n_agents, spec.act_dim))
    logp = np.zeros((t_max, n_agents))
    rew = np.zeros((t_max, n_agents))
    blown = np.zeros(n_agents, dtype=bool)
    cur_obs = obs_fn(c, state, p)

    for t in range(t_max):
        obs_raw[t] = cur_obs
        nobs = normalize_obs(cur_obs, stat.mean, stat.std())
        mean = forward(policy, nobs)
        # the stored action stays unclipped so its density matches the
        # Gaussian the ratios assume; the env saturates torques itself
        a = mean + np.exp(policy.log_std) * act_rng.standard_normal(mean.shape)
        act[t] = a
        logp[t] = log_prob(policy, nobs, a)
        new_state, new_obs, r, _ = step_core(c, state, p, a, spec.dt)
        bad = ~np.all(np.isfinite(new_state), axis=-1) | (
            np.max(np.abs(np.where(np.isfinite(new_state), new_state, 0.0)), axis=-1)
            > c.blowup_limit
        )
        blown = blown | bad
        state = np.where(blown[:, None], state, new_state)
        rew[t] = np.where(blown, c.reward_floor, r)
        cur_obs = np.where(blown[:, None], cur_obs, new_obs)
    obs_raw[t_max] = cur_obs
    return obs_raw, act, logp, rew


def train(
    spec: EnvSpec,
    dist: ParamDistribution,
    config: PpoConfig,
    seed: int,
    theta0: PolicySnapshot | None = None,
    value0: ValueParams | None = None,
    normalizer0: RunningStat | None = None,
) -> TrainResult:
    """Train a policy on episodes whose parameters are drawn from ``dist``.

    Warm starts resume from ``theta0``; when no ``normalizer0`` accompanies
    it the snapshot's frozen statistics are kept fixed, since the snapshot
    alone does not carry the sample count needed to keep updating them.
    Fully deterministic for a given seed.
    """
    if theta0 is not None:
        policy = theta0.params
        if normalizer0 is not None:
            stat = normalizer0.copy()
            track_stats = True
        else:
            stat = RunningStat(1.0, theta0.obs_mean.copy(), theta0.obs_std.copy() ** 2)
            track_stats = False
    else:
        policy = init_policy(spec.obs_dim, spec.act_dim, derive_seed(seed, "policy-init"))
        stat = RunningStat.fresh(spec.obs_dim)
        track_stats = True
    value = value0 if value0 is not None else init_value(spec.obs_dim, derive_seed(seed, "value-init"))
    policy_opt, value_opt = adam_init(policy), adam_init(value)

    best_snapshot = PolicySnapshot(policy, stat.mean.copy(), stat.std().copy())
    best_reward = -np.inf
    best_iteration = -1
    curve = np.zeros(config.n_iterations)
    metrics: list = []

    for it in range(config.n_iterations):
        obs_raw, act, logp, rew = _collect(spec, dist, policy, stat, config, seed, it)
        mean_reward = float(rew.sum(axis=0).mean())
        curve[it] = mean_reward
        if mean_reward > best_reward:
            best_reward = mean_reward
            best_iteration = it
            best_snapshot = PolicySnapshot(policy, stat.mean.copy(), stat.std().copy())

        nobs = normalize_obs(obs_raw, stat.mean, stat.std())
        values = value_forward(value, nobs)  # (T+1, B)
        adv, ret = compute_gae(rew, values, config.gamma, config.lam)
        adv = normalize_advantages(adv)
        t_max, n_agents = rew.shape
        batch = {
            "obs": nobs[:-1].reshape(t_max * n_agents, -1),
            "act": act.reshape(t_max * n_agents, -1),
            "logp": logp.reshape(-1),
            "adv": adv.reshape(-1),
            "ret": ret.reshape(-1),
        }
        up_rng = make_rng(seed, "update", it)
        policy, value, policy_opt, value_opt, m = ppo_update(
            policy, value, policy_opt, value_opt, batch, config, up_rng
        )
        if track_stats:
            stat.update(obs_raw.reshape(-1, spec.obs_dim))
        metrics.append(
            {
                "iteration": it,
                "mean_reward": mean_reward,
                "kl": m["kl"],
                "clip_fraction": m.get("clip_fraction", float("nan")),
                "log_std": float(np.mean(policy.log_std)),
            }
        )

    return TrainResult(
        snapshot=best_snapshot,
        best_iteration=best_iteration,
        best_reward=float(best_reward),
        curve=curve,
        metrics=metrics,
        final_policy=policy,
        final_value=value,
        normalizer=stat,
    )
