"""Drawer-opening task: 2-link planar arm plus a 1-DoF prismatic drawer.

The arm is torque-controlled with per-joint spring-dampers
(``tau_i = scaling_i * a_i - k_i * (q_i - q_rest_i) - b_i * qdot_i``,
stiffness ``k_i = exp(-compliance_i)``) and decoupled joint inertias;
gravity acts out of plane and is ignored. The drawer slides along -y from
a cabinet face at ``cabinet_y``; its handle starts at
``(cabinet_x, cabinet_y)`` and moves to ``(cabinet_x, cabinet_y - ext)``.
Once the end effector is within the grasp radius of the handle and its
heading is aligned with the approach direction (+y) within the tolerance,
a latch engages and a stiff tether transmits pulling forces along the
drawer axis. The latch holds only while the end effector stays within the
slip radius of the handle: straying farther (over-pulling or drifting
sideways) makes the fingers slip off, and the grasp must be re-acquired.
Integration is semi-implicit Euler (velocities first).

All core functions broadcast over leading batch dimensions: ``state``
(..., 7), ``params`` (..., 9), ``action`` (..., 2).

State columns: q1, q2, dq1, dq2, ext, dext, grasped(0/1).
Param columns follow ``DRAWER_PARAM_NAMES``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..param_space import Transform

__all__ = [
    "DRAWER_PARAM_NAMES",
    "DRAWER_TRANSFORMS",
    "DrawerConstants",
    "drawer_init_state",
    "drawer_observe",
    "drawer_step_core",
    "drawer_reward_core",
    "drawer_success",
]

DRAWER_PARAM_NAMES = (
    "joint_compliance_1",
    "joint_compliance_2",
    "joint_damping_1",
    "joint_damping_2",
    "action_scaling_1",
    "action_scaling_2",
    "drawer_damping",
    "handle_friction",
    "cabinet_x",
)

# compliances enter the dynamics through exp(-c) and may be negative, and the
# cabinet sits at a plain coordinate; everything else is a positive physical
# quantity sampled in log space
DRAWER_TRANSFORMS = (
    Transform("identity"),
    Transform("identity"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("log"),
    Transform("identity"),
)

# param column indices
_C1, _C2, _B1, _B2, _S1, _S2, _BD, _FC, _CX = range(9)


@dataclass(frozen=True)
class DrawerConstants:
    """Geometry, inertias, and reward weights of the drawer task."""

    link_lengths: tuple[float, float] = (0.4, 0.4)
    link_masses: tuple[float, float] = (1.0, 1.0)
    q_rest: tuple[float, float] = (1.1, 0.5)
    init_jitter: float = 0.05  # uniform joint-angle jitter at reset, rad
    joint_limit: float = 2.0 * math.pi  # hard travel stop, rad
    cabinet_y: float = 0.64
    max_extension: float = 0.18
    grasp_radius: float = 0.03
    align_tolerance: float = 0.3  # rad, heading error vs +y approach
    slip_radius: float = 0.045  # latched fingers slip off beyond this
    drawer_mass: float = 0.3
    tether_stiffness: float = 150.0  # latched EE-to-drawer coupling, N/m
    w_dist: float = 0.5
    w_align: float = 0.07
    w_open: float = 0.4
    w_grasp: float = 0.005
    w_action: float = 0.005
    reward_floor: float = -50.0
    blowup_limit: float = 1.0e6
    success_fraction: float = 0.8  # of max_extension, at the final step

    @property
    def joint_inertias(self) -> tuple[float, float]:
        # Decoupled approximation: rod about its end, outer link carrying
        # the second rod as a point mass at the elbow.
        l1, l2 = self.link_lengths
        m1, m2 = self.link_masses
        return (m1 * l1 * l1 / 3.0 + m2 * l1 * l1, m2 * l2 * l2 / 3.0)


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta), 2.0 * np.pi)


def fk_ee(c: DrawerConstants, q1, q2):
    """End-effector position of the 2-link arm."""
    l1, l2 = c.link_lengths
    q12 = q1 + q2
    return l1 * np.cos(q1) + l2 * np.cos(q12), l1 * np.sin(q1) + l2 * np.sin(q12)


def drawer_init_state(c: DrawerConstants, jitter: np.ndarray) -> np.ndarray:
    """Initial state from a joint-angle jitter vector (..., 2)."""
    jitter = np.asarray(jitter, dtype=np.float64)
    lead = jitter.shape[:-1]
    state = np.zeros(lead + (7,), dtype=np.float64)
    state[..., 0] = c.q_rest[0] + jitter[..., 0]
    state[..., 1] = c.q_rest[1] + jitter[..., 1]
    return state


def drawer_observe(c: DrawerConstants, state: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Observation: q1, q2, handle_x, handle_y, extension."""
    state = np.asarray(state, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    lead = np.broadcast_shapes(state.shape[:-1], params.shape[:-1])
    obs = np.empty(lead + (5,), dtype=np.float64)
    obs[..., 0] = state[..., 0]
    obs[..., 1] = state[..., 1]
    obs[..., 2] = params[..., _CX]
    obs[..., 3] = c.cabinet_y - state[..., 4]
    obs[..., 4] = state[..., 4]
    return obs


def drawer_reward_core(c: DrawerConstants, state, params, action):
    """Reward of a state given the (already clamped) action.

    Returns (reward, components); the reward is the exact ordered sum of the
    component values.
    """
    state = np.asarray(state, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    q1, q2, ext = state[..., 0], state[..., 1], state[..., 4]
    ex, ey = fk_ee(c, q1, q2)
    hx = params[..., _CX]
    hy = c.cabinet_y - ext
    dist = np.hypot(ex - hx, ey - hy)
    misalign = np.abs(wrap_angle(q1 + q2 - 0.5 * np.pi))
    components = {
        "reach": -c.w_dist * dist,
        "align": -c.w_align * misalign,
        "open": -c.w_open * (c.max_extension - ext),
        "grasp": c.w_grasp * (dist <= c.grasp_radius).astype(np.float64),
        "action": -c.w_action * (a[..., 0] ** 2 + a[..., 1] ** 2),
    }
    reward = np.zeros(np.broadcast_shapes(dist.shape, a.shape[:-1]), dtype=np.float64)
    for v in components.values():
        reward = reward + v
    return reward, components


def drawer_step_core(c: DrawerConstants, state, params, action, dt: float):
    """One semi-implicit Euler step. Returns (state', obs', reward, components)."""
    state = np.asarray(state, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)

    q1, q2 = state[..., 0], state[..., 1]
    dq1, dq2 = state[..., 2], state[..., 3]
    ext, dext = state[..., 4], state[..., 5]
    grasped = state[..., 6]

    i1, i2 = c.joint_inertias
    k1 = np.exp(-params[..., _C1])
    k2 = np.exp(-params[..., _C2])
    tau1 = params[..., _S1] * a[..., 0] - k1 * (q1 - c.q_rest[0]) - params[..., _B1] * dq1
    tau2 = params[..., _S2] * a[..., 1] - k2 * (q2 - c.q_rest[1]) - params[..., _B2] * dq2

    # velocities first, then positions; hard stops zero the velocity
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
    hx = params[..., _CX]
    hy = c.cabinet_y - ext
    handle_dist = np.hypot(ex - hx, ey - hy)
    near = handle_dist <= c.grasp_radius
    aligned = np.abs(wrap_angle(nq1 + nq2 - 0.5 * np.pi)) < c.align_tolerance
    # an existing latch holds only while the hand stays within the slip
    # radius; a fresh latch needs the tighter grasp radius plus alignment
    held = grasped * (handle_dist <= c.slip_radius).astype(np.float64)
    ngrasp = np.maximum(held, (near & aligned).astype(np.float64))

    # tether force along the drawer axis, positive = opening (-y pull)
    f_pull = ngrasp * c.tether_stiffness * (hy - ey)
    ndext = dext + dt * (f_pull - params[..., _BD] * dext) / c.drawer_mass
    # Coulomb handle friction as an implicit impulse clamp: the drawer only
    # moves once the applied impulse beats the friction bite, and the clamp
    # stays stable at any friction level (an explicit smoothed term is not)
    bite = dt * params[..., _FC] / c.drawer_mass
    ndext = np.sign(ndext) * np.maximum(np.abs(ndext) - bite, 0.0)
    next_ = ext + dt * ndext
    low = next_ < 0.0
    high = next_ > c.max_extension
    next_ = np.clip(next_, 0.0, c.max_extension)
    ndext = np.where(low & (ndext < 0.0), 0.0, ndext)
    ndext = np.where(high & (ndext > 0.0), 0.0, ndext)

    new_state = np.stack([nq1, nq2, ndq1, ndq2, next_, ndext, ngrasp], axis=-1)
    obs = drawer_observe(c, new_state, params)
    reward, components = drawer_reward_core(c, new_state, params, a)
    return new_state, obs, reward, components


def drawer_success(c: DrawerConstants, final_state: np.ndarray):
    """Task success: extension at the final step reached the open fraction."""
    return np.asarray(final_state, dtype=np.float64)[..., 4] >= c.success_fraction * c.max_extension
