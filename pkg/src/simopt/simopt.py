"""Outer loop: train, roll out on the target, score samples, update.

Each iteration trains a policy under the current parameter distribution,
collects a few deterministic-policy episodes on the hidden-parameter
target, evaluates the trajectory discrepancy of freshly sampled parameter
settings against those episodes, and runs a fixed number of chained
KL-constrained distribution updates on the scored samples. Task success is
measured separately by a batch of deterministic evaluation episodes on the
target.

The first iteration trains from scratch; later iterations warm start from
the previous best snapshot with a reduced iteration budget. A run stops
early once the evaluated target success rate reaches the configured
threshold (the iteration that reaches it still completes its update), or
after two consecutive iterations whose cost batches were unusable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .discrepancy import DiscrepancyConfig, batch_cost, discrepancy
from .envs.core import (
    EnvSpec,
    TargetEnv,
    TargetTrajectory,
    rollout_actions,
    target_rollout,
)
from .param_space import ParamDistribution, SimParams, kl_divergence, sample_detailed
from .policy import PolicySnapshot, ValueParams, init_policy
from .ppo import PpoConfig, RunningStat, train
from .reps import RepsConfig, update
from .rng import derive_seed

__all__ = [
    "SimOptConfig",
    "IterationRecord",
    "LoopState",
    "TrainCarry",
    "RunResult",
    "run_iteration",
    "run",
    "open_loop_costs",
    "ablation_open_loop",
]


@dataclass(frozen=True)
class SimOptConfig:
    max_iterations: int = 10
    samples_per_update: int = 512  # scaled-down default; override upward if desired
    real_rollouts_per_iteration: int = 3
    rl_iterations_first: int = 200
    rl_iterations_warm: int = 10
    success_eval_trials: int = 20
    success_threshold: float = 0.8
    seed: int = 0
    workers: int = 1
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reps: RepsConfig = field(default_factory=RepsConfig)
    discrepancy: DiscrepancyConfig = field(default_factory=DiscrepancyConfig)

    def __post_init__(self):
        counts = {
            "max_iterations": (self.max_iterations, 0),
            "samples_per_update": (self.samples_per_update, 1),
            "real_rollouts_per_iteration": (self.real_rollouts_per_iteration, 1),
            "rl_iterations_first": (self.rl_iterations_first, 1),
            "rl_iterations_warm": (self.rl_iterations_warm, 1),
            "success_eval_trials": (self.success_eval_trials, 1),
            "workers": (self.workers, 1),
        }
        for name, (value, least) in counts.items():
            if value < least:
                raise ValueError(f"{name} must be >= {least}, got {value}")
        if not 0.0 < self.success_threshold <= 1.0:
            raise ValueError(f"success_threshold must be in (0, 1], got {self.success_threshold}")


@dataclass
class IterationRecord:
    """Everything one iteration decided, in JSON-ready types.

    Wall-clock timings are carried along but excluded from equality so a
    rerun with the same seed compares equal to the original.
    """

    iteration: int
    mean_before: list
    cov_before: list
    mean_after: list
    cov_after: list
    policy_ref: str  # filename convention the harness honors when persisting
    reward_curve: list
    target_success: float
    cost_min: float
    cost_median: float
    cost_mean: float
    cost_max: float
    kl_used: float
    n_clamped: int
    reps_passes: list
    aborted: bool
    timings: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IterationRecord":
        return cls(**d)


@dataclass
class TrainCarry:
    """Warm-start state handed from one iteration's training to the next."""

    snapshot: PolicySnapshot
    value: ValueParams
    normalizer: RunningStat


@dataclass
class LoopState:
    """Mutable loop position: the target, the current distribution, the
    current policy carry (None before the first iteration), and the index
    of the next iteration to run."""

    target: TargetEnv
    dist: ParamDistribution
    carry: TrainCarry | None = None
    iteration: int = 0


@dataclass
class RunResult:
    records: list
    dists: list  # len(records) + 1, starting with the initial distribution
    snapshots: list  # best policy snapshot of each iteration
    initial_success: float  # evaluated success of the untrained policy
    stop_reason: str  # "success" | "max-iterations" | "aborted"

    @property
    def final_dist(self) -> ParamDistribution:
        return self.dists[-1]

    @property
    def final_snapshot(self) -> PolicySnapshot:
        return self.snapshots[-1]

    @property
    def success_series(self) -> list:
        return [self.initial_success] + [r.target_success for r in self.records]


def _evaluate_success(target: TargetEnv, snapshot: PolicySnapshot, trials: int, seeds) -> float:
    hits = sum(target_rollout(target, snapshot, s).success for s in seeds[:trials])
    return hits / trials


def _fresh_snapshot(spec: EnvSpec, seed: int) -> PolicySnapshot:
    train_seed = derive_seed(seed, "train", 0)
    params = init_policy(spec.obs_dim, spec.act_dim, derive_seed(train_seed, "policy-init"))
    return PolicySnapshot(params, np.zeros(spec.obs_dim), np.ones(spec.obs_dim))


def _cost_stats(costs: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(np.min(costs)),
        float(np.median(costs)),
        float(np.mean(costs)),
        float(np.max(costs)),
    )


def run_iteration(
    state: LoopState, config: SimOptConfig, seed: int
) -> tuple[LoopState, IterationRecord]:
    """One full pass of the loop. Returns (new state, record).

    The iteration always completes all of its stages; early stopping is the
    caller's decision. An unusable cost batch (every simulated rollout blew
    up) yields a record flagged aborted and leaves the distribution
    unchanged.
    """
    spec = state.target.spec
    dist = state.dist
    iteration = state.iteration
    t0 = time.perf_counter()

    if state.carry is None:
        ppo_cfg = replace(config.ppo, n_iterations=config.rl_iterations_first)
        result = train(spec, dist, ppo_cfg, derive_seed(seed, "train", iteration))
    else:
        ppo_cfg = replace(config.ppo, n_iterations=config.rl_iterations_warm)
        result = train(
            spec,
            dist,
            ppo_cfg,
            derive_seed(seed, "train", iteration),
            theta0=state.carry.snapshot,
            value0=state.carry.value,
            normalizer0=state.carry.normalizer,
        )
    snapshot = result.snapshot
    carry = TrainCarry(snapshot, result.final_value, result.normalizer)
    t_train = time.perf_counter()

    eval_seeds = [derive_seed(seed, "success-eval", iteration, k) for k in range(config.success_eval_trials)]
    success = _evaluate_success(state.target, snapshot, config.success_eval_trials, eval_seeds)
    target_seeds = [
        derive_seed(seed, "target", iteration, k) for k in range(config.real_rollouts_per_iteration)
    ]
    trajs = [target_rollout(state.target, snapshot, s) for s in target_seeds]
    t_target = time.perf_counter()

    dcfg = replace(config.discrepancy, obs_indices=state.target.kept_dims)
    xi, internal, n_clamped = sample_detailed(
        dist, config.samples_per_update, derive_seed(seed, "xi-cost", iteration)
    )
    base = dict(
        iteration=iteration,
        mean_before=dist.mean.tolist(),
        cov_before=dist.covariance.tolist(),
        policy_ref=f"policy_{iteration}.json",
        reward_curve=[float(r) for r in result.curve],
        target_success=success,
        n_clamped=n_clamped,
    )
    try:
        costs = batch_cost(
            xi,
            snapshot,
            spec,
            [t.observations for t in trajs],
            dcfg,
            seed=trajs[0].seed,
            workers=config.workers,
        )
    except ValueError:
        t_end = time.perf_counter()
        record = IterationRecord(
            **base,
            mean_after=dist.mean.tolist(),
            cov_after=dist.covariance.tolist(),
            cost_min=float("nan"),
            cost_median=float("nan"),
            cost_mean=float("nan"),
            cost_max=float("nan"),
            kl_used=0.0,
            reps_passes=[],
            aborted=True,
            timings={
                "train": t_train - t0,
                "target": t_target - t_train,
                "cost": t_end - t_target,
                "update": 0.0,
            },
        )
        return LoopState(state.target, dist, carry, iteration + 1), record
    t_cost = time.perf_counter()

    cur = dist
    passes = []
    for _ in range(config.reps.updates_per_iteration):
        cur, info = update(cur, internal, costs, config.reps)
        passes.append(info.as_dict())
    t_end = time.perf_counter()

    c_min, c_med, c_mean, c_max = _cost_stats(costs)
    record = IterationRecord(
        **base,
        mean_after=cur.mean.tolist(),
        cov_after=cur.covariance.tolist(),
        cost_min=c_min,
        cost_median=c_med,
        cost_mean=c_mean,
        cost_max=c_max,
        kl_used=kl_divergence(cur, dist),
        reps_passes=passes,
        aborted=False,
        timings={
            "train": t_train - t0,
            "target": t_target - t_train,
            "cost": t_cost - t_target,
            "update": t_end - t_cost,
        },
    )
    return LoopState(state.target, cur, carry, iteration + 1), record


def run(config: SimOptConfig, init_dist: ParamDistribution, target: TargetEnv) -> RunResult:
    """Run the loop until success, the iteration cap, or repeated aborts.

    Before any training, the freshly initialized policy is evaluated on the
    target so the success-vs-iteration series has a baseline point.
    """
    spec = target.spec
    if init_dist.names != spec.param_names:
        raise ValueError("initial distribution does not match the task's parameters")
    seed = config.seed

    init_seeds = [
        derive_seed(seed, "success-eval", "init", k) for k in range(config.success_eval_trials)
    ]
    initial_success = _evaluate_success(
        target, _fresh_snapshot(spec, seed), config.success_eval_trials, init_seeds
    )

    state = LoopState(target, init_dist)
    records: list[IterationRecord] = []
    dists = [init_dist]
    snapshots: list[PolicySnapshot] = []
    consecutive_aborts = 0
    reason = "max-iterations"

    for _ in range(config.max_iterations):
        state, record = run_iteration(state, config, seed)
        records.append(record)
        dists.append(state.dist)
        snapshots.append(state.carry.snapshot)
        if record.aborted:
            consecutive_aborts += 1
            if consecutive_aborts >= 2:
                reason = "aborted"
                break
        else:
            consecutive_aborts = 0
        if record.target_success >= config.success_threshold:
            reason = "success"
            break
    return RunResult(records, dists, snapshots, initial_success, reason)


def open_loop_costs(
    xi_samples: list[SimParams],
    spec: EnvSpec,
    real_trajs: list[TargetTrajectory],
    config: DiscrepancyConfig,
) -> np.ndarray:
    """Costs from replaying each target episode's actions open loop.

    Every simulated rollout reuses the action sequence and episode seed of
    the target trajectory it is compared against, so the simulated motion
    never reacts to what the sampled parameters do to the observations.
    """
    costs = np.empty(len(xi_samples))
    for i, xi in enumerate(xi_samples):
        vals = []
        for traj in real_trajs:
            sim = rollout_actions(spec, xi, traj.actions, traj.seed)
            obs = sim.observations
            if config.obs_indices is not None:
                obs = obs[:, list(config.obs_indices)]
            vals.append(discrepancy(obs, traj.observations, config))
        costs[i] = float(np.mean(vals))
    return costs


def ablation_open_loop(
    state: LoopState,
    config: SimOptConfig,
    seed: int,
    focus: tuple[str, ...] | None = None,
) -> dict:
    """Score one sample batch closed loop and open loop; compare the updates.

    Runs one target rollout with the current policy, evaluates the batch
    cost twice (policy-driven simulated rollouts vs blind replay of the
    target's recorded actions), applies a single distribution update pass
    per mode, and reports each mode's mean shift together with its cosine
    similarity to the direction from the current mean to the target's true
    parameters. ``focus`` restricts the cosine to named components (for a
    single component it reduces to the sign of the shift). The target's
    observation mask applies to both modes' costs.
    """
    if state.carry is None:
        raise ValueError("the open-loop ablation needs a trained policy in the state")
    target, dist, snapshot = state.target, state.dist, state.carry.snapshot
    spec = target.spec
    dcfg = replace(config.discrepancy, obs_indices=target.kept_dims)
    one_pass = replace(config.reps, updates_per_iteration=1)

    traj = target_rollout(target, snapshot, derive_seed(seed, "ablation-target"))
    xi, internal, _ = sample_detailed(
        dist, config.samples_per_update, derive_seed(seed, "ablation-xi")
    )
    real = [traj.observations]

    closed_costs = batch_cost(xi, snapshot, spec, real, dcfg, seed=traj.seed, workers=config.workers)
    closed_dist, closed_info = update(dist, internal, closed_costs, one_pass)
    open_costs = open_loop_costs(xi, spec, [traj], dcfg)
    open_dist, open_info = update(dist, internal, open_costs, one_pass)

    if focus is None:
        idx = list(range(dist.dim))
    else:
        idx = [dist.names.index(name) for name in focus]
    truth = dist.from_physical(target._true_params)
    to_truth = truth[idx] - dist.mean[idx]

    def shift_report(new_dist, info):
        shift = new_dist.mean - dist.mean
        f = shift[idx]
        denom = float(np.linalg.norm(f) * np.linalg.norm(to_truth))
        cosine = float(f @ to_truth / denom) if denom > 0 else 0.0
        return {
            "mean_shift": shift.tolist(),
            "magnitude": float(np.linalg.norm(f)),
            "cosine_to_truth": cosine,
            "eta": info.eta,
            "achieved_kl": info.achieved_kl,
        }

    return {
        "focus": list(focus) if focus is not None else list(dist.names),
        "closed_loop": shift_report(closed_dist, closed_info),
        "open_loop": shift_report(open_dist, open_info),
    }
