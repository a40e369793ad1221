"""Environment dynamics, rewards, rollouts, and target-wrapper tests."""
import math

import numpy as np
import pytest

from conftest import drawer_params, peg_params, zero_snapshot

from simopt.envs import (
    EnvState,
    Trajectory,
    make_drawer_spec,
    make_peg_spec,
    make_target,
    observe,
    peg_energy,
    peg_reward,
    drawer_reward,
    reset,
    rollout,
    rollout_actions,
    step,
    target_rollout,
)
from simopt.envs.drawer import drawer_success, fk_ee, wrap_angle
from simopt.rng import make_rng


def drawer_state(q1, q2, dq1=0.0, dq2=0.0, ext=0.0, dext=0.0, grasped=0.0):
    return EnvState("drawer", np.array([q1, q2, dq1, dq2, ext, dext, grasped], dtype=np.float64))


def peg_state(q1, q2, dq1, dq2, px, py, pvx, pvy):
    return EnvState("peg", np.array([q1, q2, dq1, dq2, px, py, pvx, pvy], dtype=np.float64))


# ---------------------------------------------------------------- reset


def test_reset_deterministic(drawer_spec, peg_spec):
    for spec, params in ((drawer_spec, drawer_params()), (peg_spec, peg_params())):
        a = reset(spec, params, 123)
        b = reset(spec, params, 123)
        np.testing.assert_array_equal(a.vec, b.vec)


def test_drawer_reset_closed_and_ungrasped(drawer_spec):
    state = reset(drawer_spec, drawer_params(), 5)
    assert state.extension == 0.0
    assert not state.grasped
    np.testing.assert_array_equal(state.dq, [0.0, 0.0])


def test_reset_jitter_bounded(drawer_spec):
    c = drawer_spec.constants
    for seed in range(30):
        state = reset(drawer_spec, drawer_params(), seed)
        assert np.all(np.abs(state.q - np.array(c.q_rest)) <= c.init_jitter)


def test_cabinet_position_passthrough(drawer_spec):
    s0 = reset(drawer_spec, drawer_params(cabinet_x=0.0), 9)
    s1 = reset(drawer_spec, drawer_params(cabinet_x=0.15), 9)
    np.testing.assert_array_equal(s0.vec, s1.vec)  # arm state ignores the cabinet
    o0 = observe(drawer_spec, s0, drawer_params(cabinet_x=0.0))
    o1 = observe(drawer_spec, s1, drawer_params(cabinet_x=0.15))
    assert o1[2] - o0[2] == 0.15
    np.testing.assert_array_equal(np.delete(o0, 2), np.delete(o1, 2))


def test_param_name_mismatch_rejected(drawer_spec, peg_spec):
    with pytest.raises(ValueError, match="parameter names"):
        reset(drawer_spec, peg_params(), 0)
    with pytest.raises(ValueError, match="parameter names"):
        reset(peg_spec, drawer_params(), 0)


def test_drawer_observation_layout(drawer_spec):
    c = drawer_spec.constants
    state = drawer_state(0.9, 0.4, ext=0.05)
    obs = observe(drawer_spec, state, drawer_params(cabinet_x=0.3))
    np.testing.assert_allclose(obs, [0.9, 0.4, 0.3, c.cabinet_y - 0.05, 0.05], atol=0.0)


def test_peg_observation_layout(peg_spec):
    state = peg_state(1.0, -0.2, 0.0, 0.0, 0.31, 0.28, 0.0, 0.0)
    obs = observe(peg_spec, state, peg_params())
    np.testing.assert_array_equal(obs, [1.0, -0.2, 0.31, 0.28])


# ---------------------------------------------------------------- dynamics


def test_drawer_equilibrium_at_rest(drawer_spec):
    c = drawer_spec.constants
    state = drawer_state(c.q_rest[0], c.q_rest[1])
    new, _, _, _ = step(drawer_spec, state, drawer_params(), np.zeros(2))
    assert np.max(np.abs(new.vec - state.vec)) <= 1e-12


def test_peg_equilibrium_at_static_sag(peg_spec):
    from simopt.envs.peg import peg_init_state

    params = peg_params()
    vec = peg_init_state(peg_spec.constants, params.values, np.zeros(2))
    state = EnvState("peg", vec)
    new, _, _, _ = step(peg_spec, state, params, np.zeros(2))
    assert np.max(np.abs(new.vec - state.vec)) <= 1e-12


def test_torque_velocity_delta_scales_with_action_scaling(drawer_spec):
    c = drawer_spec.constants
    start = drawer_state(c.q_rest[0], c.q_rest[1])
    action = np.array([0.5, -0.25])
    one, _, _, _ = step(drawer_spec, start, drawer_params(), action)
    two, _, _, _ = step(
        drawer_spec,
        start,
        drawer_params(action_scaling_1=2.4, action_scaling_2=2.4),
        action,
    )
    np.testing.assert_array_equal(two.dq, 2.0 * one.dq)


def test_action_clamped_before_scaling(drawer_spec):
    c = drawer_spec.constants
    start = drawer_state(c.q_rest[0], c.q_rest[1])
    a, _, _, _ = step(drawer_spec, start, drawer_params(), np.array([1.0, 1.0]))
    b, _, _, _ = step(drawer_spec, start, drawer_params(), np.array([40.0, 7.0]))
    np.testing.assert_array_equal(a.vec, b.vec)


def test_joint_damping_never_raises_peak_speed(drawer_spec):
    t = np.arange(120)
    script = np.stack(
        [0.3 * np.sin(2.0 * np.pi * t / 60.0), 0.3 * np.sin(2.0 * np.pi * t / 40.0)], axis=1
    )
    peaks = []
    for damping in (0.3, 0.8, 2.0, 5.0):
        # cabinet far off to the side so the latch never engages mid-script
        params = drawer_params(joint_damping_1=damping, joint_damping_2=damping, cabinet_x=-0.5)
        state = reset(drawer_spec, params, 3)
        peak = 0.0
        for t in range(script.shape[0]):
            state, _, _, _ = step(drawer_spec, state, params, script[t])
            peak = max(peak, float(np.max(np.abs(state.dq))))
        peaks.append(peak)
    assert all(b <= a + 1e-9 for a, b in zip(peaks, peaks[1:]))


def test_drawer_state_bounds_hold_under_random_actions(drawer_spec):
    c = drawer_spec.constants
    rng = make_rng(1, "bounds")
    params = drawer_params()
    state = reset(drawer_spec, params, 2)
    for _ in range(200):
        state, obs, reward, _ = step(drawer_spec, state, params, rng.uniform(-1, 1, 2))
        assert np.all(np.isfinite(state.vec))
        assert np.all(np.abs(state.q) <= c.joint_limit)
        assert 0.0 <= state.extension <= c.max_extension
        assert np.all(np.isfinite(obs)) and math.isfinite(reward)


def test_peg_energy_conserved_without_drive(peg_spec):
    # arm pinned at rest (no torque, no jitter), rope essentially undamped:
    # the swinging peg keeps its mechanical energy to within 1 percent
    from simopt.envs.peg import peg_init_state

    params = peg_params(rope_compliance=-2.0, rope_damping=1e-10, peg_mass=0.15)
    vec = peg_init_state(peg_spec.constants, params.values, np.zeros(2))
    vec[6] = 0.5  # sideways push
    state = EnvState("peg", vec)
    e0 = peg_energy(peg_spec, state, params)
    scale = abs(e0) + 0.5 * 0.15 * 0.5**2
    for _ in range(150):
        state, _, _, _ = step(peg_spec, state, params, np.zeros(2))
        assert abs(peg_energy(peg_spec, state, params) - e0) <= 0.01 * scale


def test_stiffer_rope_reduces_sag(peg_spec):
    from simopt.envs.peg import peg_init_state

    soft = peg_init_state(peg_spec.constants, peg_params(rope_compliance=-2.0).values, np.zeros(2))
    stiff = peg_init_state(peg_spec.constants, peg_params(rope_compliance=-6.0).values, np.zeros(2))
    assert stiff[5] > soft[5]


# ---------------------------------------------------------------- rewards


def test_reward_components_sum_exactly(drawer_spec, peg_spec):
    rng = make_rng(4, "components")
    for spec, params_fn, build in (
        (drawer_spec, drawer_params, lambda r: drawer_state(*r.uniform(-2, 2, 2), ext=r.uniform(0, 0.18))),
        (peg_spec, peg_params, lambda r: peg_state(*r.uniform(-1, 1, 4), *r.uniform(-0.5, 0.8, 2), *r.uniform(-1, 1, 2))),
    ):
        for _ in range(25):
            state = build(rng)
            _, _, reward, comps = step(spec, state, params_fn(), rng.uniform(-1, 1, 2))
            total = 0.0
            for v in comps.values():
                total += v
            assert reward == total


def test_drawer_reward_grasped_fully_open(drawer_spec):
    c = drawer_spec.constants
    q1 = math.asin((c.cabinet_y - c.max_extension - c.link_lengths[1]) / c.link_lengths[0])
    q2 = 0.5 * math.pi - q1
    cx = c.link_lengths[0] * math.cos(q1)
    state = drawer_state(q1, q2, ext=c.max_extension)
    reward, comps = drawer_reward(drawer_spec, state, drawer_params(cabinet_x=cx), np.zeros(2))
    assert abs(reward - c.w_grasp) < 1e-9
    assert comps["grasp"] == c.w_grasp
    assert abs(comps["reach"]) < 1e-9 and abs(comps["align"]) < 1e-9
    assert comps["open"] == 0.0 and comps["action"] == 0.0


def test_drawer_reward_far_and_misaligned(drawer_spec):
    c = drawer_spec.constants
    # q1+q2 = pi puts the hand heading a quarter turn off the +y approach
    q1, q2 = 0.5 * math.pi, 0.5 * math.pi
    ex, ey = fk_ee(c, q1, q2)
    cx = math.sqrt(1.0 - (c.cabinet_y - ey) ** 2) + ex
    state = drawer_state(q1, q2)
    reward, comps = drawer_reward(drawer_spec, state, drawer_params(cabinet_x=cx), np.zeros(2))
    expected = -c.w_dist * 1.0 - c.w_align * 0.5 * math.pi - c.w_open * c.max_extension
    assert abs(reward - expected) < 1e-12


def test_drawer_action_penalty_quadruples(drawer_spec):
    state = drawer_state(1.0, 0.3)
    a = np.array([0.3, -0.2])
    _, c1 = drawer_reward(drawer_spec, state, drawer_params(), a)
    _, c2 = drawer_reward(drawer_spec, state, drawer_params(), 2.0 * a)
    assert c2["action"] == 4.0 * c1["action"]


def test_peg_reward_at_hole_center(peg_spec):
    c = peg_spec.constants
    state = peg_state(1.0, -0.3, 0, 0, c.hole_pos[0], c.hole_pos[1], 0, 0)
    reward, comps = peg_reward(peg_spec, state, peg_params(), np.zeros(2))
    assert reward == pytest.approx(c.w_bonus, abs=1e-12)
    assert comps["bonus"] == c.w_bonus


def test_peg_reward_offset_point(peg_spec):
    c = peg_spec.constants
    state = peg_state(1.0, -0.3, 0, 0, c.hole_pos[0] + 0.1, c.hole_pos[1], 0, 0)
    reward, _ = peg_reward(peg_spec, state, peg_params(), np.zeros(2))
    assert reward == pytest.approx(-c.w_l1 * 0.1 - c.w_l2 * 0.1, abs=1e-12)


def test_peg_action_penalty_unit_magnitude(peg_spec):
    c = peg_spec.constants
    state = peg_state(1.0, -0.3, 0, 0, c.hole_pos[0], c.hole_pos[1], 0, 0)
    _, comps = peg_reward(peg_spec, state, peg_params(), np.array([1.0, 0.0]))
    assert comps["action"] == -c.w_action


def test_drawer_success_threshold(drawer_spec):
    c = drawer_spec.constants
    ok = drawer_state(1.0, 0.5, ext=c.success_fraction * c.max_extension)
    shy = drawer_state(1.0, 0.5, ext=c.success_fraction * c.max_extension - 1e-9)
    assert bool(drawer_success(c, ok.vec))
    assert not bool(drawer_success(c, shy.vec))


def test_wrap_angle_range():
    for theta in (-7.0, -math.pi, -0.1, 0.0, 3.0, math.pi, 9.0):
        w = float(wrap_angle(theta))
        assert -math.pi < w <= math.pi
        assert abs(math.remainder(theta - w, 2.0 * math.pi)) < 1e-12


# ---------------------------------------------------------------- rollouts


def test_rollout_deterministic_bitwise(drawer_spec, drawer_policy):
    a = rollout(drawer_spec, drawer_params(), drawer_policy, 11)
    b = rollout(drawer_spec, drawer_params(), drawer_policy, 11)
    np.testing.assert_array_equal(a.observations, b.observations)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    assert a.success == b.success


def test_stochastic_rollout_seeded(drawer_spec, drawer_policy):
    a = rollout(drawer_spec, drawer_params(), drawer_policy, 11, stochastic=True)
    b = rollout(drawer_spec, drawer_params(), drawer_policy, 11, stochastic=True)
    c = rollout(drawer_spec, drawer_params(), drawer_policy, 12, stochastic=True)
    np.testing.assert_array_equal(a.actions, b.actions)
    assert not np.array_equal(a.actions, c.actions)


def test_rollout_row_counts(drawer_spec, peg_spec, drawer_policy, peg_policy):
    t = rollout(drawer_spec, drawer_params(), drawer_policy, 0)
    assert t.observations.shape == (150, 5)
    assert t.actions.shape == (150, 2)
    assert t.rewards.shape == (150,)
    t = rollout(peg_spec, peg_params(), peg_policy, 0)
    assert t.observations.shape == (150, 4)


def test_zero_policy_never_opens_drawer(drawer_spec):
    traj = rollout(drawer_spec, drawer_params(), zero_snapshot(5, 2), 0)
    assert traj.success is False
    assert traj.observations[-1, 4] < 0.01


def test_rollout_components_match_rewards(drawer_spec, drawer_policy):
    traj = rollout(drawer_spec, drawer_params(), drawer_policy, 3)
    total = np.zeros_like(traj.rewards)
    for v in traj.reward_components.values():
        total = total + v
    np.testing.assert_array_equal(total, traj.rewards)


def test_rollout_actions_replay_and_length_check(drawer_spec, drawer_policy):
    traj = rollout(drawer_spec, drawer_params(), drawer_policy, 21)
    replay = rollout_actions(drawer_spec, drawer_params(), traj.actions, 21)
    np.testing.assert_array_equal(replay.observations, traj.observations)
    with pytest.raises(ValueError, match="150"):
        rollout_actions(drawer_spec, drawer_params(), traj.actions[:-1], 21)


def test_blowup_flagged_and_finite(peg_spec, peg_policy):
    # a hugely stiff rope destabilizes the explicit peg update and the
    # episode is cut into a flagged, floor-reward failure with finite rows
    traj = rollout(peg_spec, peg_params(rope_compliance=-30.0), peg_policy, 0)
    assert traj.blown and traj.success is False
    assert np.all(np.isfinite(traj.observations))
    assert np.all(np.isfinite(traj.rewards))
    assert traj.rewards[-1] == peg_spec.constants.reward_floor


def test_drawer_contained_even_when_violently_stiff(drawer_spec, drawer_policy):
    # the joint hard stops keep the arm bounded no matter how stiff the
    # springs get, so the drawer task never blows up, it just thrashes
    traj = rollout(drawer_spec, drawer_params(joint_compliance_1=-30.0), drawer_policy, 0)
    assert not traj.blown
    assert np.all(np.isfinite(traj.observations))
    assert np.all(np.abs(traj.observations[:, :2]) <= drawer_spec.constants.joint_limit)


def test_trajectory_json_round_trip(drawer_spec, drawer_policy):
    traj = rollout(drawer_spec, drawer_params(), drawer_policy, 8)
    back = Trajectory.from_json(traj.to_json())
    np.testing.assert_array_equal(back.observations, traj.observations)
    np.testing.assert_array_equal(back.actions, traj.actions)
    np.testing.assert_array_equal(back.rewards, traj.rewards)
    assert back.success == traj.success and back.seed == traj.seed


# ---------------------------------------------------------------- target env


def test_target_matches_rollout_same_params(drawer_spec, drawer_policy):
    params = drawer_params()
    target = make_target(drawer_spec, params)
    tt = target_rollout(target, drawer_policy, 17)
    plain = rollout(drawer_spec, params, drawer_policy, 17)
    np.testing.assert_array_equal(tt.observations, plain.observations)
    np.testing.assert_array_equal(tt.actions, plain.actions)
    assert tt.success == plain.success


def test_target_mask_hides_dimensions(drawer_spec, drawer_policy):
    target = make_target(drawer_spec, drawer_params(), hidden_dims=(2,))
    assert target.kept_dims == (0, 1, 3, 4)
    tt = target_rollout(target, drawer_policy, 17)
    assert tt.observations.shape == (150, 4)
    full = rollout(drawer_spec, drawer_params(), drawer_policy, 17)
    np.testing.assert_array_equal(tt.observations, full.observations[:, [0, 1, 3, 4]])


def test_target_exposes_no_reward(drawer_spec, drawer_policy):
    tt = target_rollout(make_target(drawer_spec, drawer_params()), drawer_policy, 0)
    assert not hasattr(tt, "rewards")
    assert not hasattr(tt, "reward_components")


def test_target_rejects_bad_hidden_dims(drawer_spec):
    with pytest.raises(ValueError, match="hidden"):
        make_target(drawer_spec, drawer_params(), hidden_dims=(5,))


def test_spec_dims(drawer_spec, peg_spec):
    assert (drawer_spec.obs_dim, drawer_spec.act_dim) == (5, 2)
    assert (peg_spec.obs_dim, peg_spec.act_dim) == (4, 2)
    assert drawer_spec.episode_length == 150
    assert drawer_spec.dt == pytest.approx(1.0 / 60.0)


def test_spec_overrides():
    spec = make_drawer_spec(episode_length=10, grasp_radius=0.05)
    assert spec.episode_length == 10
    assert spec.constants.grasp_radius == 0.05
