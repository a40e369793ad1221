"""Adaptive domain randomization for reduced-order manipulation tasks.

The package alternates policy training under a Gaussian distribution over
simulation parameters with KL-constrained updates of that distribution,
driven by the trajectory discrepancy between simulated rollouts and a
hidden-parameter target system.

Layout:
    param_space   parameter transforms, Gaussian distribution, sampling, KL
    envs          two-link arm tasks (drawer, peg) and the target wrapper
    policy        small MLP policy/value nets and frozen snapshots
    ppo           clipped-surrogate policy training on randomized episodes
    discrepancy   smoothed L1+L2 trajectory distance and batch costs
    reps          exponentiated-cost reweighting with a KL trust region
    simopt        the outer adaptation loop
    oracles       slow reference implementations used as ground truth
    harness       config files, presets, experiment runner, CLI
"""

from .discrepancy import DiscrepancyConfig, batch_cost, discrepancy
from .envs import (
    EnvSpec,
    TargetEnv,
    TargetTrajectory,
    make_drawer_spec,
    make_peg_spec,
    make_target,
    rollout,
    rollout_actions,
    target_rollout,
)
from .param_space import (
    ParamDistribution,
    SimParams,
    Transform,
    kl_divergence,
    log_density,
    sample,
    sample_detailed,
)
from .policy import PolicySnapshot, init_policy, init_value, snapshot_action
from .ppo import PpoConfig, RunningStat, TrainResult, compute_gae, train
from .reps import RepsConfig, RepsUpdateInfo, solve_dual, update, weights
from .rng import derive_seed, make_rng
from .simopt import (
    IterationRecord,
    LoopState,
    RunResult,
    SimOptConfig,
    TrainCarry,
    ablation_open_loop,
    open_loop_costs,
    run,
    run_iteration,
)

__version__ = "0.1.0"

__all__ = [
    "DiscrepancyConfig",
    "batch_cost",
    "discrepancy",
    "EnvSpec",
    "TargetEnv",
    "TargetTrajectory",
    "make_drawer_spec",
    "make_peg_spec",
    "make_target",
    "rollout",
    "rollout_actions",
    "target_rollout",
    "ParamDistribution",
    "SimParams",
    "Transform",
    "kl_divergence",
    "log_density",
    "sample",
    "sample_detailed",
    "PolicySnapshot",
    "init_policy",
    "init_value",
    "snapshot_action",
    "PpoConfig",
    "RunningStat",
    "TrainResult",
    "compute_gae",
    "train",
    "RepsConfig",
    "RepsUpdateInfo",
    "solve_dual",
    "update",
    "weights",
    "derive_seed",
    "make_rng",
    "IterationRecord",
    "LoopState",
    "RunResult",
    "SimOptConfig",
    "TrainCarry",
    "ablation_open_loop",
    "open_loop_costs",
    "run",
    "run_iteration",
    "__version__",
]
