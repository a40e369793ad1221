"""Environment API: specs, states, rollouts, and hidden-parameter targets.

Single-episode entry points live here; the vectorized training collector in
:mod:`simopt.ppo` calls the per-task ``*_step_core`` functions directly with
batched arrays. Both paths share the same dynamics code.

Episodes have fixed length. A blowup (non-finite state or any entry above
the blowup limit) marks the episode failed: remaining rewards take the
floor value, the observation is frozen at the last finite row, and no NaN
or Inf ever leaves this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..policy import PolicySnapshot, snapshot_action
from ..param_space import SimParams
from ..rng import make_rng
from .drawer import (
    DRAWER_PARAM_NAMES,
    DrawerConstants,
    drawer_init_state,
    drawer_observe,
    drawer_reward_core,
    drawer_step_core,
    drawer_success,
)
from .peg import (
    PEG_PARAM_NAMES,
    PegConstants,
    peg_energy_core,
    peg_in_tolerance,
    peg_init_state,
    peg_observe,
    peg_reward_core,
    peg_step_core,
)

__all__ = [
    "EnvSpec",
    "EnvState",
    "Trajectory",
    "TargetEnv",
    "TargetTrajectory",
    "make_drawer_spec",
    "make_peg_spec",
    "reset",
    "observe",
    "step",
    "drawer_reward",
    "peg_reward",
    "peg_energy",
    "rollout",
    "rollout_actions",
    "make_target",
    "target_rollout",
]


@dataclass(frozen=True)
class EnvSpec:
    """Immutable description of a task: dynamics constants and horizon."""

    task: str  # "drawer" | "peg"
    episode_length: int
    dt: float
    constants: DrawerConstants | PegConstants

    @property
    def param_names(self) -> tuple[str, ...]:
        return DRAWER_PARAM_NAMES if self.task == "drawer" else PEG_PARAM_NAMES

    @property
    def obs_dim(self) -> int:
        return 5 if self.task == "drawer" else 4

    @property
    def act_dim(self) -> int:
        return 2


def make_drawer_spec(episode_length: int = 150, dt: float = 1.0 / 60.0, **overrides) -> EnvSpec:
    consts = DrawerConstants()
    if overrides:
        consts = replace(consts, **overrides)
    return EnvSpec("drawer", episode_length, dt, consts)


def make_peg_spec(episode_length: int = 150, dt: float = 1.0 / 60.0, **overrides) -> EnvSpec:
    consts = PegConstants()
    if overrides:
        consts = replace(consts, **overrides)
    return EnvSpec("peg", episode_length, dt, consts)


@dataclass(frozen=True)
class EnvState:
    """Raw state vector with named accessors.

    Drawer layout: q1, q2, dq1, dq2, extension, ext_velocity, grasped.
    Peg layout: q1, q2, dq1, dq2, peg_x, peg_y, peg_vx, peg_vy.
    """

    task: str
    vec: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return self.vec[0:2]

    @property
    def dq(self) -> np.ndarray:
        return self.vec[2:4]

    @property
    def extension(self) -> float:
        assert self.task == "drawer"
        return float(self.vec[4])

    @property
    def grasped(self) -> bool:
        assert self.task == "drawer"
        return bool(self.vec[6] > 0.5)

    @property
    def peg_pos(self) -> np.ndarray:
        assert self.task == "peg"
        return self.vec[4:6]

    @property
    def peg_vel(self) -> np.ndarray:
        assert self.task == "peg"
        return self.vec[6:8]


@dataclass(frozen=True)
class Trajectory:
    """Fixed-length episode record.

    ``observations`` holds the pre-action observation of every step (T rows);
    ``reward_components`` maps component names to (T,) arrays and sums to
    ``rewards`` exactly.
    """

    observations: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T, act_dim)
    rewards: np.ndarray  # (T,)
    reward_components: dict[str, np.ndarray]
    success: bool
    seed: int
    blown: bool = False

    def to_json_dict(self) -> dict:
        return {
            "obs": self.observations.tolist(),
            "act": self.actions.tolist(),
            "rew": self.rewards.tolist(),
            "success": bool(self.success),
            "seed": int(self.seed),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Trajectory":
        return Trajectory(
            observations=np.array(data["obs"], dtype=np.float64),
            actions=np.array(data["act"], dtype=np.float64),
            rewards=np.array(data["rew"], dtype=np.float64),
            reward_components={},
            success=bool(data["success"]),
            seed=int(data["seed"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(text: str) -> "Trajectory":
        return Trajectory.from_json_dict(json.loads(text))


def _check_params(spec: EnvSpec, params: SimParams) -> np.ndarray:
    if params.names != spec.param_names:
        raise ValueError(f"parameter names {params.names} do not match task {spec.task!r}")
    return params.values


def reset(spec: EnvSpec, params: SimParams, seed: int) -> EnvState:
    """Initial state with seeded uniform joint-angle jitter."""
    p = _check_params(spec, params)
    c = spec.constants
    jitter = make_rng(seed, "reset").uniform(-c.init_jitter, c.init_jitter, 2)
    if spec.task == "drawer":
        vec = drawer_init_state(c, jitter)
    else:
        vec = peg_init_state(c, p, jitter)
    return EnvState(spec.task, vec)


def observe(spec: EnvSpec, state: EnvState, params: SimParams) -> np.ndarray:
    p = _check_params(spec, params)
    if spec.task == "drawer":
        return drawer_observe(spec.constants, state.vec, p)
    return peg_observe(spec.constants, state.vec, p)


def step(spec: EnvSpec, state: EnvState, params: SimParams, action: np.ndarray):
    """Advance one step. Returns (state', obs', reward, components)."""
    p = _check_params(spec, params)
    core = drawer_step_core if spec.task == "drawer" else peg_step_core
    vec, obs, reward, comps = core(spec.constants, state.vec, p, np.asarray(action, dtype=np.float64), spec.dt)
    return EnvState(spec.task, vec), obs, float(reward), {k: float(v) for k, v in comps.items()}


def drawer_reward(spec: EnvSpec, state: EnvState, params: SimParams, action: np.ndarray):
    """Reward of a drawer state under an action. Returns (reward, components)."""
    p = _check_params(spec, params)
    r, comps = drawer_reward_core(spec.constants, state.vec, p, np.asarray(action, dtype=np.float64))
    return float(r), {k: float(v) for k, v in comps.items()}


def peg_reward(spec: EnvSpec, state: EnvState, params: SimParams, action: np.ndarray):
    """Reward of a peg state under an action. Returns (reward, components)."""
    p = _check_params(spec, params)
    r, comps = peg_reward_core(spec.constants, state.vec, p, np.asarray(action, dtype=np.float64))
    return float(r), {k: float(v) for k, v in comps.items()}


def peg_energy(spec: EnvSpec, state: EnvState, params: SimParams) -> float:
    """Mechanical energy of the peg subsystem (see peg.peg_energy_core)."""
    p = _check_params(spec, params)
    return float(peg_energy_core(spec.constants, state.vec, p))


def _is_blown(vec: np.ndarray, limit: float) -> bool:
    return bool(np.any(~np.isfinite(vec)) or np.any(np.abs(vec) > limit))


def _run_episode(
    spec: EnvSpec,
    params: SimParams,
    action_fn: Callable[[int, np.ndarray], np.ndarray],
    seed: int,
) -> Trajectory:
    p = _check_params(spec, params)
    c = spec.constants
    t_max = spec.episode_length
    core = drawer_step_core if spec.task == "drawer" else peg_step_core
    obs_fn = drawer_observe if spec.task == "drawer" else peg_observe

    state = reset(spec, params, seed).vec
    obs = np.zeros((t_max, spec.obs_dim))
    act = np.zeros((t_max, spec.act_dim))
    rew = np.zeros(t_max)
    comps: dict[str, np.ndarray] = {}
    cur_obs = obs_fn(c, state, p)
    blown = False
    in_tol_run = 0
    best_tol_run = 0

    for t in range(t_max):
        obs[t] = cur_obs
        a = np.clip(np.asarray(action_fn(t, cur_obs), dtype=np.float64), -1.0, 1.0)
        act[t] = a
        state, next_obs, r, step_comps = core(c, state, p, a, spec.dt)
        if _is_blown(state, c.blowup_limit):
            blown = True
            rew[t:] = c.reward_floor
            for name in step_comps:
                comps.setdefault(name, np.zeros(t_max))
            break
        rew[t] = r
        for name, v in step_comps.items():
            comps.setdefault(name, np.zeros(t_max))[t] = v
        cur_obs = next_obs
        if spec.task == "peg":
            if peg_in_tolerance(c, state):
                in_tol_run += 1
                best_tol_run = max(best_tol_run, in_tol_run)
            else:
                in_tol_run = 0

    if blown:
        # freeze the observation record at the last finite row
        last = obs[t]
        obs[t + 1 :] = last
        success = False
    elif spec.task == "drawer":
        success = bool(drawer_success(c, state))
    else:
        success = best_tol_run >= c.success_steps

    return Trajectory(obs, act, rew, comps, success, int(seed), blown)


def rollout(
    spec: EnvSpec,
    params: SimParams,
    policy: PolicySnapshot,
    seed: int,
    stochastic: bool = False,
) -> Trajectory:
    """Run one policy episode. Deterministic unless ``stochastic``."""
    rng = make_rng(seed, "actions") if stochastic else None

    def act(t, obs):
        return snapshot_action(policy, obs, rng, stochastic)

    return _run_episode(spec, params, act, seed)


def rollout_actions(spec: EnvSpec, params: SimParams, actions: np.ndarray, seed: int) -> Trajectory:
    """Replay a fixed action sequence open-loop."""
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape[0] != spec.episode_length:
        raise ValueError(f"need {spec.episode_length} actions, got {actions.shape[0]}")

    def act(t, obs):
        return actions[t]

    return _run_episode(spec, params, act, seed)


@dataclass(frozen=True)
class TargetEnv:
    """Hidden-parameter environment standing in for the real system.

    The true parameters are private; rollouts expose observations (optionally
    masked) and the commanded actions, never rewards, states, or parameters.
    """

    spec: EnvSpec
    _true_params: SimParams
    hidden_dims: tuple[int, ...] = ()

    @property
    def kept_dims(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.spec.obs_dim) if i not in self.hidden_dims)


@dataclass(frozen=True)
class TargetTrajectory:
    """What a target rollout exposes: observations, own actions, task outcome.

    Success is included because it is externally observable (the drawer
    visibly opens, the peg visibly seats); rewards, full states, and
    parameters stay hidden.
    """

    observations: np.ndarray  # (T, kept_dims)
    actions: np.ndarray  # (T, act_dim)
    seed: int
    success: bool


def make_target(spec: EnvSpec, true_params: SimParams, hidden_dims: tuple[int, ...] = ()) -> TargetEnv:
    _check_params(spec, true_params)
    bad = [i for i in hidden_dims if not 0 <= i < spec.obs_dim]
    if bad:
        raise ValueError(f"hidden observation dims out of range: {bad}")
    return TargetEnv(spec, true_params, tuple(hidden_dims))


def target_rollout(target: TargetEnv, policy: PolicySnapshot, seed: int) -> TargetTrajectory:
    """Deterministic-policy rollout against the hidden parameters."""
    traj = rollout(target.spec, target._true_params, policy, seed, stochastic=False)
    obs = traj.observations[:, list(target.kept_dims)]
    return TargetTrajectory(obs, traj.actions, int(seed), traj.success)
