"""Reduced-order manipulation environments (drawer opening, swing-peg-in-hole)."""

from .core import (
    EnvSpec,
    EnvState,
    Trajectory,
    TargetEnv,
    TargetTrajectory,
    make_drawer_spec,
    make_peg_spec,
    reset,
    observe,
    step,
    drawer_reward,
    peg_reward,
    peg_energy,
    rollout,
    rollout_actions,
    make_target,
    target_rollout,
)
from .drawer import DRAWER_PARAM_NAMES, DRAWER_TRANSFORMS, DrawerConstants
from .peg import PEG_PARAM_NAMES, PEG_TRANSFORMS, PegConstants

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
    "DRAWER_PARAM_NAMES",
    "DRAWER_TRANSFORMS",
    "DrawerConstants",
    "PEG_PARAM_NAMES",
    "PEG_TRANSFORMS",
    "PegConstants",
]
