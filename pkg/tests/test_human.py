"""Avatar retargeting and body geometry.

align_waist is rechecked against a from-scratch transcription of its angle
formulas; the three hand-worked input/output triples are asserted exactly.
The biomechanics sampler is compared to its target uniform distributions with
a Kolmogorov-Smirnov statistic computed here, not imported.
"""
import dataclasses
import math

import numpy as np
import pytest

from caresim.geometry import Pose6, quat_from_rpy, quat_rotate
from caresim.human import (
    Anthropometrics,
    DegenerateVector,
    HumanState,
    NonPositiveHeight,
    TrackedInput,
    align_head,
    align_waist,
    arm_length,
    arm_points,
    arm_surface_point,
    body_capsules,
    estimate_height_scale,
    head_center,
    load_trace,
    mouth_point,
    retarget_frame,
    sample_biomechanics,
    save_trace,
    split_yaw,
)


def oracle_waist(psi) -> tuple[float, float, float]:
    """The published waist-alignment formulas, transcribed directly:
    r = atan2(psi_y, psi_z); p = atan2(psi_x cos r, psi_z);
    y = atan2(cos r, sin r sin p), with atan2(0, 0) := 0."""
    px, py, pz = float(psi[0]), float(psi[1]), float(psi[2])
    r = math.atan2(py, pz)
    cr, sr = math.cos(r), math.sin(r)
    p = math.atan2(px * cr, pz)
    y = math.atan2(cr, sr * math.sin(p))
    return r, p, y


def default_state(sex: str = "male") -> HumanState:
    return HumanState.neutral(Anthropometrics.default(sex), waist_center=(0.0, 0.0, 0.0))


def test_align_waist_matches_formula_transcription():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        psi = rng.uniform(-1.0, 1.0, size=3)
        if np.linalg.norm(psi) < 1e-2:
            continue
        w = rng.uniform(-0.5, 0.5, size=3)
        got = align_waist(w + psi, w)
        want = oracle_waist(psi)
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_align_waist_hand_cases_exact():
    # straight up; straight up and forward; purely sideways
    assert align_waist((0.0, 0.0, 1.0), (0.0, 0.0, 0.0)) == (0.0, 0.0, math.pi / 2)
    assert align_waist((1.0, 0.0, 1.0), (0.0, 0.0, 0.0)) == (0.0, math.pi / 4, math.pi / 2)
    assert align_waist((0.0, 1.0, 0.0), (0.0, 0.0, 0.0)) == (math.pi / 2, 0.0, 0.0)


def test_align_waist_rejects_degenerate():
    with pytest.raises(DegenerateVector):
        align_waist((1e-4, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_split_yaw_sum_and_ratio():
    rng = np.random.default_rng(7)
    for _ in range(10000):
        theta_y = float(rng.uniform(-4.0, 4.0))
        y_psi = float(rng.uniform(-4.0, 4.0))
        head, waist = split_yaw(theta_y, y_psi)
        d = theta_y - y_psi
        assert head + waist == d  # waist is the exact remainder
        assert head == 0.7 * d


def test_align_head_passthrough_and_clamp():
    roll, pitch, clamped = align_head((0.2, -0.3, 0.0))
    assert (roll, pitch, clamped) == (0.2, -0.3, False)
    roll, pitch, clamped = align_head((2.0, 0.0, 0.0))
    assert clamped and roll == 0.7


def test_estimate_height_scale():
    assert estimate_height_scale((0.0, 0.0, 1.8), 1.5) == pytest.approx(1.2)
    with pytest.raises(NonPositiveHeight):
        estimate_height_scale((0.0, 0.0, -0.1), 1.5)
    with pytest.raises(NonPositiveHeight):
        estimate_height_scale((0.0, 0.0, 1.0), 0.0)


# -- body geometry -----------------------------------------------------------


def test_head_center_upright():
    st = default_state()
    hc = head_center(st)
    # zero waist: head sits torso_height above the waist center, straight up
    np.testing.assert_allclose(hc, st.waist_center + [0, 0, st.anthropometrics.torso_height],
                               atol=1e-12)


def test_mouth_is_forward_of_head_center():
    st = default_state()
    m = mouth_point(st)
    hc = head_center(st)
    np.testing.assert_allclose(m - hc, [st.anthropometrics.mouth_offset, 0.0, 0.0],
                               atol=1e-12)
    # and strictly inside the head sphere
    assert np.linalg.norm(m - hc) < st.anthropometrics.head_radius


def test_mouth_follows_waist_rotation():
    st = default_state()
    tilted = dataclasses.replace(st, waist=np.array([0.0, 0.5, 0.0]))
    m0, m1 = mouth_point(st), mouth_point(tilted)
    assert not np.allclose(m0, m1)
    # distance from waist center is invariant under the rotation
    assert np.linalg.norm(m0 - st.waist_center) == pytest.approx(
        np.linalg.norm(m1 - st.waist_center), abs=1e-9)


def test_body_capsules_layout():
    st = default_state()
    caps = body_capsules(st)
    a = st.anthropometrics
    hc = head_center(st)
    # torso capsule stops a head radius below the head center
    torso_a, torso_b, torso_r = caps[0]
    np.testing.assert_allclose(torso_a, st.waist_center, atol=1e-12)
    np.testing.assert_allclose(torso_b, hc - [0, 0, a.head_radius], atol=1e-12)
    assert torso_r == a.torso_radius
    # head sphere is a zero-length capsule at the head center
    head_a, head_b, head_r = caps[1]
    np.testing.assert_allclose(head_a, hc, atol=1e-12)
    np.testing.assert_allclose(head_b, hc, atol=1e-12)
    assert head_r == a.head_radius
    # two arms, three segments each
    assert len(caps) == 2 + 6


def test_arm_points_chain_lengths():
    st = default_state()
    pts = arm_points(st, "right")
    a = st.anthropometrics
    assert np.linalg.norm(pts["elbow"] - pts["shoulder"]) == pytest.approx(a.upper_arm, abs=1e-9)
    assert np.linalg.norm(pts["wrist"] - pts["elbow"]) == pytest.approx(a.forearm, abs=1e-9)
    assert arm_length(st, "right") == pytest.approx(a.upper_arm + a.forearm + a.hand)


def test_arm_surface_point_offsets_by_radius():
    st = default_state()
    for s in (0.01, 0.2, 0.45):
        p, n = arm_surface_point(st, "right", s)
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-9)
        # the surface point sits one arm radius off the skeleton
        pts = arm_points(st, "right")
        segs = [(pts["shoulder"], pts["elbow"]), (pts["elbow"], pts["wrist"]),
                (pts["wrist"], pts["tip"])]
        d = min(_seg_dist(p, a_, b_) for a_, b_ in segs)
        assert d == pytest.approx(st.anthropometrics.arm_radius, abs=1e-9)


def _seg_dist(p, a, b) -> float:
    ab = b - a
    t = float(np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


# -- full-frame retargeting ---------------------------------------------------


def tracked(head_pos, head_rpy=(0.0, 0.0, 0.0), t: float = 0.0) -> TrackedInput:
    hand = Pose6(np.array([0.3, 0.2, 0.8]), quat_from_rpy(0, 0, 0))
    return TrackedInput(head=Pose6(np.asarray(head_pos, dtype=float), quat_from_rpy(*head_rpy)),
                        left_hand=hand, right_hand=hand, timestamp=t)


def test_retarget_frame_is_deterministic():
    st = default_state()
    frame = tracked((0.1, 0.05, 0.62), (0.1, -0.2, 0.3))
    out1, flags1 = retarget_frame(st, frame)
    out2, flags2 = retarget_frame(st, frame)
    np.testing.assert_array_equal(out1.joint_vector(), out2.joint_vector())
    assert flags1 == flags2


def test_retarget_frame_moves_head_toward_target():
    st = default_state()
    target = np.array([0.15, 0.1, 0.58])
    out, _ = retarget_frame(st, tracked(target))
    before = np.linalg.norm(head_center(st) - target)
    after = np.linalg.norm(head_center(out) - target)
    assert after < before


def test_retarget_frame_flags_clamped_head():
    st = default_state()
    _, flags = retarget_frame(st, tracked((0.0, 0.0, 0.6), (3.0, 0.0, 0.0)))
    assert flags.head_clamped


# -- biomechanics sampling ----------------------------------------------------


def ks_statistic_uniform(samples: np.ndarray, lo: float, hi: float) -> float:
    """sup_x |ecdf(x) - cdf(x)| for the U(lo, hi) cdf, evaluated at the jumps."""
    xs = np.sort(samples)
    cdf = np.clip((xs - lo) / (hi - lo), 0.0, 1.0)
    n = len(xs)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


@pytest.mark.parametrize("sex,lo,hi", [("male", 0.50, 0.70), ("female", 0.44, 0.64)])
def test_sampler_torso_height_is_uniform(sex, lo, hi):
    rng = np.random.default_rng(3)
    heights = np.array([sample_biomechanics(rng, sex, "randomized")[0].torso_height
                        for _ in range(10000)])
    assert heights.min() >= lo and heights.max() <= hi
    assert ks_statistic_uniform(heights, lo, hi) < 0.02


def test_sampler_fixed_mode_is_default_body():
    rng = np.random.default_rng(3)
    anth, waist = sample_biomechanics(rng, "male", "fixed")
    assert anth == Anthropometrics.default("male")
    np.testing.assert_array_equal(waist, np.zeros(3))


def test_sampler_waist_deviation_within_ten_degrees():
    rng = np.random.default_rng(3)
    for _ in range(200):
        _, waist = sample_biomechanics(rng, "male", "randomized")
        assert np.all(np.abs(waist) <= math.radians(10.0) + 1e-12)


def test_sampler_rejects_unknown_mode():
    with pytest.raises(ValueError):
        sample_biomechanics(np.random.default_rng(0), "male", "sometimes")


def test_anthropometrics_scaled_scales_lengths():
    a = Anthropometrics.default("female").scaled(1.1)
    b = Anthropometrics.default("female")
    assert a.torso_height == pytest.approx(1.1 * b.torso_height)
    assert a.mouth_offset == pytest.approx(1.1 * b.mouth_offset)
    assert a.total_height_scale == pytest.approx(1.1)
    with pytest.raises(NonPositiveHeight):
        a.scaled(0.0)


# -- tracked-input traces -----------------------------------------------------


def test_trace_round_trip(tmp_path):
    frames = [tracked((0.0, 0.0, 0.6 + 0.01 * i), (0.0, 0.1 * i, 0.0), t=0.1 * i)
              for i in range(5)]
    path = tmp_path / "trace.jsonl"
    save_trace(path, frames)
    loaded = load_trace(path)
    assert len(loaded) == 5
    for a, b in zip(frames, loaded):
        assert a.timestamp == b.timestamp
        np.testing.assert_allclose(a.head.position, b.head.position, atol=0)
        np.testing.assert_allclose(a.head.orientation, b.head.orientation, atol=0)
