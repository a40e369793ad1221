"""Swing-peg-in-hole task: 2-link planar arm with a peg on a rope.

The rope is a single taut-only spring-damper of rest length ``rope_length``
(stiffness ``exp(-rope_compliance)``, damping along the rope direction)
from the end effector to a point-mass peg. Gravity acts on the peg only;
the arm moves in a horizontal plane. The hole sits on the 45-degree ray
from the arm base; the peg must stay within the hole tolerance radius for
a run of consecutive steps to count as success. Semi-implicit Euler,
velocities first, arm updated before the peg so the rope sees the new
end-effector motion.

State columns: q1, q2, dq1, dq2, peg_x, peg_y, peg_vx, peg_vy.
Param columns follow ``PEG_PARAM_NAMES``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..param_space import Transform
from .drawer import fk_ee, wrap_angle  # same arm geometry helpers

__all__ = [
    "PEG_PARAM_NAMES",
    "PEG_TRANSFORMS",
    "PegConstants",
    "peg_init_state",
    "peg_observe",
    "peg_step_core",
    "peg_reward_core",
    "peg_in_tolerance",
    "peg_energy_core",
]

PEG_PARAM_NAMES = (
    "joint_compliance_1",
    "joint_compliance_2",
    "joint_damping_1",
    "joint_damping_2",
    "action_scaling_1",
    "action_scaling_2",
    "rope_compliance",
    "rope_damping",
    "rope_length",
    "peg_mass",
)

# compliances (joint and rope) act through exp(-c) and may be negative;
# the rest are positive physical quantities sampled in log space
PEG_TRANSFORMS = (
    Transform("identity"),
    Transform("identity"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("identity"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
)

_C1, _C2, _B1, _B2, _S1, _S2, _RC, _RB, _RL, _PM = range(10)


@dataclass(frozen=True)
class PegConstants:
    """Geometry, inertias, and reward weights of the peg task."""

    link_lengths: tuple[float, float] = (0.4, 0.4)
    link_masses: tuple[float, float] = (1.0, 1.0)
    q_rest: tuple[float, float] = (1.45, -0.35)
    init_jitter: float = 0.05
    joint_limit: float = 2.0 * math.pi
    gravity: float = 9.81  # acts on the peg, -y
    hole_pos: tuple[float, float] = (0.32, 0.32)  # on the 45-degree ray
    hole_tolerance: float = 0.02
    success_steps: int = 10  # consecutive in-tolerance steps
    w_l1: float = 10.0
    w_l2: float = 4.0
    w_bonus: float = 0.1
    w_action: float = 0.7
    reward_floor: float = -50.0
    blowup_limit: float = 1.0e6

    @property
    def joint_inertias(self) -> tuple[float, float]:
        l1, l2 = self.link_lengths
        m1, m2 = self.link_masses
        return (m1 * l1 * l1 / 3.0 + m2 * l1 * l1, m2 * l2 * l2 / 3.0)


def ee_velocity(c: PegConstants, q1, q2, dq1, dq2):
    """End-effector velocity from joint state (planar Jacobian)."""
    l1, l2 = c.link_lengths
    q12 = q1 + q2
    dq12 = dq1 + dq2
    vx = -l1 * np.sin(q1) * dq1 - l2 * np.sin(q12) * dq12
    vy = l1 * np.cos(q1) * dq1 + l2 * np.cos(q12) * dq12
    return vx, vy


def peg_init_state(c: PegConstants, params: np.ndarray, jitter: np.ndarray) -> np.ndarray:
    """Arm at jittered rest, peg hanging at its static rope equilibrium."""
    params = np.asarray(params, dtype=np.float64)
    jitter = np.asarray(jitter, dtype=np.float64)
    lead = np.broadcast_shapes(params.shape[:-1], jitter.shape[:-1])
    state = np.zeros(lead + (8,), dtype=np.float64)
    q1 = c.q_rest[0] + jitter[..., 0]
    q2 = c.q_rest[1] + jitter[..., 1]
    ex, ey = fk_ee(c, q1, q2)
    k_rope = np.exp(-params[..., _RC])
    sag = params[..., _PM] * c.gravity / k_rope  # static stretch
    state[..., 0] = q1
    state[..., 1] = q2
    state[..., 4] = ex
    state[..., 5] = ey - (params[..., _RL] + sag)
    return state


def peg_observe(c: PegConstants, state: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Observation: q1, q2, peg_x, peg_y."""
    state = np.asarray(state, dtype=np.float64)
    return state[..., (0, 1, 4, 5)]


def peg_in_tolerance(c: PegConstants, state, params=None):
    """Whether the peg is inside the hole tolerance radius."""
    state = np.asarray(state, dtype=np.float64)
    dx = state[..., 4] - c.hole_pos[0]
    dy = state[..., 5] - c.hole_pos[1]
    return np.hypot(dx, dy) < c.hole_tolerance


def peg_reward_core(c: PegConstants, state, params, action):
    """Reward of a state given the (already clamped) action."""
    state = np.asarray(state, dtype=np.float64)
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    dx = state[..., 4] - c.hole_pos[0]
    dy = state[..., 5] - c.hole_pos[1]
    d1 = np.abs(dx) + np.abs(dy)
    d2 = np.hypot(dx, dy)
    components = {
        "dist_l1": -c.w_l1 * d1,
        "dist_l2": -c.w_l2 * d2,
        "bonus": c.w_bonus * (d2 < c.hole_tolerance).astype(np.float64),
        "action": -c.w_action * (a[..., 0] ** 2 + a[..., 1] ** 2),
    }
    reward = np.zeros(np.broadcast_shapes(d1.shape, a.shape[:-1]), dtype=np.float64)
    for v in components.values():
        reward = reward + v
    return reward, components


def peg_step_core(c: PegConstants, state, params, action, dt: float):
    """One semi-implicit Euler step. Returns (state', obs', reward, components)."""
    state = np.asarray(state, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)

    q1, q2 = state[..., 0], state[..., 1]
    dq1, dq2 = state[..., 2], state[..., 3]
    px, py = state[..., 4], state[..., 5]
    pvx, pvy = state[..., 6], state[..., 7]

    i1, i2 = c.joint_inertias
    k1 = np.exp(-params[..., _C1])
    k2 = np.exp(-params[..., _C2])
    tau1 = params[..., _S1] * a[..., 0] - k1 * (q1 - c.q_rest[0]) - params[..., _B1] * dq1
    tau2 = params[..., _S2] * a[..., 1] - k2 * (q2 - c.q_rest[1]) - params[..., _B2] * dq2

    ndq1 = dq1 + dt * tau1 / i1
    ndq2 = dq2 + dt * tau2 / i2
    nq1 = q1 + dt * ndq1
    nq2 = q2 + dt * ndq2
    lim = c.joint_limit
    hit1 = np.abs(nq1) > lim
    hit2 = np.abs(nq2) > lim
    nq1 = np.clip(nq1, -lim, lim)
    nq2 = np.clip(nq2, -lim, lim)
    ndq1 = np.where(hit1, 0.0, ndq1)
    ndq2 = np.where(hit2, 0.0, ndq2)

    ex, ey = fk_ee(c, nq1, nq2)
    evx, evy = ee_velocity(c, nq1, nq2, ndq1, ndq2)

    dx = px - ex
    dy = py - ey
    length = np.hypot(dx, dy)
    safe_len = np.maximum(length, 1e-9)
    ux, uy = dx / safe_len, dy / safe_len
    stretch = length - params[..., _RL]
    taut = stretch > 0.0
    k_rope = np.exp(-params[..., _RC])
    f_spring = np.where(taut, -k_rope * stretch, 0.0)
    v_rad = (pvx - evx) * ux + (pvy - evy) * uy
    f_damp = np.where(taut, -params[..., _RB] * v_rad, 0.0)
    f_rad = f_spring + f_damp
    m = params[..., _PM]
    ax = f_rad * ux / m
    ay = f_rad * uy / m - c.gravity

    npvx = pvx + dt * ax
    npvy = pvy + dt * ay
    npx = px + dt * npvx
    npy = py + dt * npvy

    new_state = np.stack([nq1, nq2, ndq1, ndq2, npx, npy, npvx, npvy], axis=-1)
    obs = peg_observe(c, new_state, params)
    reward, components = peg_reward_core(c, new_state, params, a)
    return new_state, obs, reward, components


def peg_energy_core(c: PegConstants, state, params):
    """Mechanical energy of the peg subsystem (kinetic + gravity + rope).

    The rope stores energy only when taut. Conserved by the unactuated,
    undamped system up to the integrator's bounded oscillation.
    """
    state = np.asarray(state, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    px, py = state[..., 4], state[..., 5]
    pvx, pvy = state[..., 6], state[..., 7]
    ex, ey = fk_ee(c, state[..., 0], state[..., 1])
    length = np.hypot(px - ex, py - ey)
    stretch = np.maximum(length - params[..., _RL], 0.0)
    k_rope = np.exp(-params[..., _RC])
    m = params[..., _PM]
    kinetic = 0.5 * m * (pvx**2 + pvy**2)
    potential = m * c.gravity * py
    elastic = 0.5 * k_rope * stretch**2
    return kinetic + potential + elastic
