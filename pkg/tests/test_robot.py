"""Arm wrapper, tools, and the penalty contact model."""
import math

import numpy as np
import pytest

from caresim.configs import load_robot_profile
from caresim.geometry import Pose6, quat_from_axis_angle, quat_from_rpy, quat_rotate
from caresim.kinematics import forward_kinematics
from caresim.robot import (
    CONTACT_STIFFNESS,
    DELTA_MAX,
    RobotState,
    apply_action,
    contact_forces,
    particle_slots,
    standard_tool,
    tool_point,
    tool_pose,
    tool_tilt_deg,
    tool_up,
    wipe_face,
    wrist_pose,
)


def make_state(profile: str = "armA", q=None, tool: str = "spoon") -> RobotState:
    prof = load_robot_profile(profile)
    chain = prof.chain
    if q is None:
        q = chain.mid_pose()
    return RobotState(profile, chain, q, standard_tool(tool))


def test_wrist_pose_matches_fk():
    st = make_state()
    _, ee = forward_kinematics(st.chain, st.q)
    assert wrist_pose(st).almost_equal(ee, tol=1e-12)


def test_tool_point_composition():
    st = make_state(tool="spoon")
    wrist = wrist_pose(st)
    # grip raises the tool frame 3 cm along wrist z, tip is 9 cm along tool x
    expected = wrist.compose(Pose6(np.array([0.0, 0.0, 0.03]))).transform_point((0.09, 0.0, 0.0))
    np.testing.assert_allclose(tool_point(st), expected, atol=1e-12)


def test_standard_tools():
    spoon = standard_tool("spoon")
    assert spoon.contact_radius == 0.02
    cup = standard_tool("cup")
    np.testing.assert_allclose(cup.tip_offset, [0.0, 0.0, 0.05])
    scratcher = standard_tool("scratcher")
    np.testing.assert_allclose(scratcher.tip_offset, [0.12, 0.0, 0.0])
    wiper = standard_tool("wiper")
    assert wiper.face_half_extent == 0.04
    # wipe face hangs below the wrist flange
    assert wiper.tip_offset[2] < 0.0
    with pytest.raises(ValueError):
        standard_tool("fork")


def test_apply_action_clips_and_clamps():
    st = make_state()
    big = np.full(7, 10.0)
    nxt = apply_action(st, big)
    np.testing.assert_allclose(nxt.q - st.q, np.minimum(np.full(7, DELTA_MAX),
                                                        st.chain.upper_limits - st.q),
                               atol=1e-12)
    # at the limit, further positive action is a no-op
    at_limit = RobotState(st.profile, st.chain, st.chain.upper_limits, st.tool)
    np.testing.assert_array_equal(apply_action(at_limit, big).q, at_limit.q)


def test_apply_action_rejects_non_finite():
    st = make_state()
    with pytest.raises(ValueError):
        apply_action(st, [np.nan, 0, 0, 0, 0, 0, 0])


def test_tool_tilt_degrees():
    chain = load_robot_profile("armA").chain
    st = make_state()
    up = tool_up(st)
    assert tool_tilt_deg(st) == pytest.approx(math.degrees(math.acos(np.clip(up[2], -1, 1))))
    assert 0.0 <= tool_tilt_deg(st) <= 180.0


def test_wipe_face_points_along_tool_tip():
    st = make_state(tool="wiper")
    face, up = wipe_face(st)
    pose = tool_pose(st)
    np.testing.assert_allclose(face, pose.transform_point((0.0, 0.0, -0.12)), atol=1e-12)
    np.testing.assert_allclose(up, quat_rotate(pose.orientation, (0, 0, 1)), atol=1e-12)
    assert np.linalg.norm(up) == pytest.approx(1.0)


# -- contact model -----------------------------------------------------------


def test_contact_force_is_linear_in_penetration():
    st = make_state(tool="spoon")
    tp = tool_point(st)
    r_tool = st.tool.contact_radius
    # capsule axis placed so the gap to the tool sphere is exact
    for gap in (-0.015, -0.005, 0.0, 0.01):
        capsule = (tp + np.array([r_tool + 0.05 + gap, 0, 0]),
                   tp + np.array([r_tool + 0.05 + gap, 0, 1]), 0.05)
        rep = contact_forces(st, [capsule])
        if gap < 0:
            assert rep.total_force == pytest.approx(CONTACT_STIFFNESS * -gap, abs=1e-9)
            assert rep.max_penetration == pytest.approx(-gap, abs=1e-12)
            assert rep.contact_count == 1
        else:
            assert rep.total_force == 0.0
            assert rep.contact_count == 0


def test_contact_forces_sum_over_capsules():
    st = make_state(tool="spoon")
    tp = tool_point(st)
    near = (tp, tp + np.array([0, 0, 1e-6]), 0.05)  # heavily penetrating sphere-ish capsule
    rep1 = contact_forces(st, [near])
    rep2 = contact_forces(st, [near, near])
    assert rep2.total_force == pytest.approx(2.0 * rep1.total_force)
    assert rep2.contact_count == 2
    assert rep2.max_penetration == rep1.max_penetration


def test_contact_empty_scene():
    st = make_state()
    rep = contact_forces(st, [])
    assert rep.total_force == 0.0 and rep.contact_count == 0


# -- particle slots ----------------------------------------------------------


def test_particle_slots_shapes_and_spread():
    spoon = standard_tool("spoon")
    slots = particle_slots(spoon, 8)
    assert slots.shape == (8, 3)
    # spoon slots cluster around the bowl center
    assert np.all(np.linalg.norm(slots - spoon.tip_offset, axis=1) < 0.05)

    cup = standard_tool("cup")
    slots = particle_slots(cup, 50)
    assert slots.shape == (50, 3)
    # cup slots stay inside the cup: below the rim, within the bore radius
    assert np.all(slots[:, 2] <= 0.05 + 1e-12)
    assert np.all(np.linalg.norm(slots[:, :2], axis=1) <= 0.025 + 1e-12)
    # distinct resting spots
    assert len({tuple(np.round(s, 9)) for s in slots}) == 50


def test_particle_slots_empty():
    assert particle_slots(standard_tool("cup"), 0).shape == (0, 3)


def test_robot_state_clamps_q():
    prof = load_robot_profile("armA")
    st = RobotState("armA", prof.chain, np.full(7, 100.0), standard_tool("spoon"))
    np.testing.assert_array_equal(st.q, prof.chain.upper_limits)
