"""The 20-joint simulated human: body geometry, tracked-input retargeting, and
the biomechanics sampler that distinguishes fixed from randomized training
populations.

The avatar has two 7-DoF arms, a 3-DoF head, and a 3-DoF waist. The waist
center W sits at a fixed offset above the furniture; torso direction for waist
angles (r, p, y) is R_x(-r) R_y(p) R_z(y) applied to +z, which makes the
head-alignment formulas exact for an upright person.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import (
    Pose6,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_rpy,
)
from .kinematics import IkParams, JointChain, Link, forward_kinematics, ik_dls


class RetargetError(ValueError):
    pass


class NonPositiveHeight(RetargetError):
    pass


class DegenerateVector(RetargetError):
    pass


class TraceError(ValueError):
    pass


# Fraction of measured head yaw kept by the head joint; the waist gets the rest.
HEAD_YAW_SHARE = 0.7

# Joint limits, radians. Waist pitch reaches -pi/2 - slack so a supine posture
# (plus sampled deviation) stays legal.
WAIST_LIMITS = np.array([[-0.60, 0.60], [-1.80, 0.60], [-0.80, 0.80]])
HEAD_LIMITS = np.array([[-0.70, 0.70], [-0.90, 0.90], [-1.40, 1.40]])

_RIGHT_ARM_LIMITS = [
    (-2.60, 0.80),   # shoulder pitch (about y; negative raises the arm forward)
    (-2.20, 0.30),   # shoulder roll (about x; negative abducts the right arm)
    (-1.50, 1.50),   # upper-arm twist
    (-2.40, 0.00),   # elbow (flexion is negative)
    (-1.50, 1.50),   # forearm twist
    (-1.20, 1.20),   # wrist pitch
    (-0.60, 0.60),   # wrist deviation
]
# Left arm mirrors the roll and deviation ranges.
_LEFT_ARM_LIMITS = [
    (-2.60, 0.80),
    (-0.30, 2.20),
    (-1.50, 1.50),
    (-2.40, 0.00),
    (-1.50, 1.50),
    (-1.20, 1.20),
    (-0.60, 0.60),
]

# Arm pose used when no randomization applies: hand resting forward on the lap.
NEUTRAL_ARM_Q = np.array([0.25, -0.05, 0.0, -1.30, 0.0, 0.1, 0.0])

TORSO_HEIGHT_RANGE = {"male": (0.50, 0.70), "female": (0.44, 0.64)}
# Hard representability bound, wider than the sampled ranges so scaled
# avatars (height estimation) stay valid without being unbounded.
TORSO_HARD_RANGE = (0.40, 0.80)
WAIST_DEVIATION_LIMIT = math.radians(10.0)


@dataclass(frozen=True)
class Anthropometrics:
    """Body dimensions in meters. Defaults are the midpoints of the sampled
    torso-height ranges with limb segments from common stature ratios."""

    sex: str
    torso_height: float
    upper_arm: float
    forearm: float
    hand: float
    shoulder_half_width: float
    shoulder_drop: float
    arm_radius: float
    torso_radius: float = 0.11
    head_radius: float = 0.09
    mouth_offset: float = 0.08
    total_height_scale: float = 1.0

    def __post_init__(self):
        if self.sex not in ("male", "female"):
            raise ValueError(f"unknown sex: {self.sex!r}")
        if not (TORSO_HARD_RANGE[0] <= self.torso_height <= TORSO_HARD_RANGE[1]):
            raise ValueError(f"torso height out of range: {self.torso_height}")
        for name in ("upper_arm", "forearm", "hand", "shoulder_half_width",
                     "shoulder_drop", "arm_radius", "torso_radius", "head_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @staticmethod
    def default(sex: str) -> "Anthropometrics":
        if sex == "male":
            return Anthropometrics(sex, 0.60, 0.33, 0.28, 0.19, 0.19, 0.13, 0.045)
        if sex == "female":
            return Anthropometrics(sex, 0.54, 0.30, 0.26, 0.17, 0.17, 0.12, 0.040)
        raise ValueError(f"unknown sex: {sex!r}")

    def scaled(self, scale: float) -> "Anthropometrics":
        """Uniformly rescale every length by `scale` (stacking with prior scaling)."""
        if scale <= 0:
            raise NonPositiveHeight(f"scale must be positive, got {scale}")
        return replace(
            self,
            torso_height=self.torso_height * scale,
            upper_arm=self.upper_arm * scale,
            forearm=self.forearm * scale,
            hand=self.hand * scale,
            shoulder_half_width=self.shoulder_half_width * scale,
            shoulder_drop=self.shoulder_drop * scale,
            arm_radius=self.arm_radius * scale,
            torso_radius=self.torso_radius * scale,
            head_radius=self.head_radius * scale,
            mouth_offset=self.mouth_offset * scale,
            total_height_scale=self.total_height_scale * scale,
        )


@dataclass(frozen=True)
class HumanState:
    """Anthropometrics plus the 20 controllable joint values and waist center."""

    anthropometrics: Anthropometrics
    waist: np.ndarray          # (roll, pitch, yaw)
    head: np.ndarray           # (roll, pitch, yaw)
    right_arm: np.ndarray      # 7 joint angles
    left_arm: np.ndarray       # 7 joint angles
    waist_center: np.ndarray   # fixed per furniture

    def __post_init__(self):
        waist = np.asarray(self.waist, dtype=float).reshape(3)
        head = np.asarray(self.head, dtype=float).reshape(3)
        right = np.asarray(self.right_arm, dtype=float).reshape(7)
        left = np.asarray(self.left_arm, dtype=float).reshape(7)
        w = np.asarray(self.waist_center, dtype=float).reshape(3)
        _check_limits("waist", waist, WAIST_LIMITS)
        _check_limits("head", head, HEAD_LIMITS)
        _check_limits("right_arm", right, np.array(_RIGHT_ARM_LIMITS))
        _check_limits("left_arm", left, np.array(_LEFT_ARM_LIMITS))
        object.__setattr__(self, "waist", waist)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "right_arm", right)
        object.__setattr__(self, "left_arm", left)
        object.__setattr__(self, "waist_center", w)

    @staticmethod
    def neutral(anthro: Anthropometrics, waist_center, waist=(0.0, 0.0, 0.0)) -> "HumanState":
        return HumanState(
            anthropometrics=anthro,
            waist=np.asarray(waist, dtype=float),
            head=np.zeros(3),
            right_arm=NEUTRAL_ARM_Q.copy(),
            left_arm=NEUTRAL_ARM_Q * np.array([1, -1, 1, 1, 1, 1, 1]),
            waist_center=np.asarray(waist_center, dtype=float),
        )

    def joint_vector(self) -> np.ndarray:
        """All 20 controllable joints: waist, head, right arm, left arm."""
        return np.concatenate([self.waist, self.head, self.right_arm, self.left_arm])


def _check_limits(name: str, values: np.ndarray, limits: np.ndarray) -> None:
    lo, hi = limits[:, 0], limits[:, 1]
    if np.any(values < lo - 1e-9) or np.any(values > hi + 1e-9):
        raise ValueError(f"{name} joints outside model limits: {values}")


@dataclass(frozen=True)
class TrackedInput:
    """One frame of headset/controller poses."""

    head: Pose6
    left_hand: Pose6
    right_hand: Pose6
    timestamp: float


# ---------------------------------------------------------------------------
# Body frames


def torso_rotation(waist) -> np.ndarray:
    r, p, y = waist
    q = quat_multiply(quat_from_axis_angle((1, 0, 0), -r), quat_from_axis_angle((0, 1, 0), p))
    return quat_normalize(quat_multiply(q, quat_from_axis_angle((0, 0, 1), y)))


def head_center(state: HumanState) -> np.ndarray:
    q = torso_rotation(state.waist)
    return state.waist_center + quat_rotate(q, (0.0, 0.0, state.anthropometrics.torso_height))


def head_orientation(state: HumanState) -> np.ndarray:
    from .geometry import quat_from_rpy

    return quat_normalize(quat_multiply(torso_rotation(state.waist), quat_from_rpy(*state.head)))


def mouth_point(state: HumanState) -> np.ndarray:
    return head_center(state) + quat_rotate(
        head_orientation(state), (state.anthropometrics.mouth_offset, 0.0, 0.0))


def shoulder_position(state: HumanState, side: str) -> np.ndarray:
    a = state.anthropometrics
    sign = -1.0 if side == "right" else 1.0
    local = np.array([0.0, sign * a.shoulder_half_width, a.torso_height - a.shoulder_drop])
    return state.waist_center + quat_rotate(torso_rotation(state.waist), local)


def arm_chain(state: HumanState, side: str) -> JointChain:
    """7-DoF arm chain rooted at the shoulder, end effector at the palm."""
    a = state.anthropometrics
    limits = _RIGHT_ARM_LIMITS if side == "right" else _LEFT_ARM_LIMITS
    zero = Pose6.identity()
    links = (
        Link(zero, (0, 1, 0), limits[0]),
        Link(zero, (1, 0, 0), limits[1]),
        Link(zero, (0, 0, 1), limits[2]),
        Link(Pose6(np.array([0, 0, -a.upper_arm])), (0, 1, 0), limits[3]),
        Link(zero, (0, 0, 1), limits[4]),
        Link(Pose6(np.array([0, 0, -a.forearm])), (0, 1, 0), limits[5]),
        Link(zero, (1, 0, 0), limits[6]),
    )
    base = Pose6(shoulder_position(state, side), torso_rotation(state.waist))
    return JointChain(links, base=base, ee_offset=Pose6(np.array([0, 0, -0.5 * a.hand])))


def arm_points(state: HumanState, side: str) -> dict[str, np.ndarray]:
    """World positions of shoulder, elbow, wrist, and fingertip."""
    chain = arm_chain(state, side)
    q = state.right_arm if side == "right" else state.left_arm
    poses, _ = forward_kinematics(chain, q)
    shoulder = chain.base.position
    elbow = poses[3].position
    wrist = poses[5].position
    tip = poses[6].transform_point((0.0, 0.0, -state.anthropometrics.hand))
    return {"shoulder": shoulder, "elbow": elbow, "wrist": wrist, "tip": tip}


def arm_capsules(state: HumanState, side: str) -> list[tuple[np.ndarray, np.ndarray, float]]:
    pts = arm_points(state, side)
    r = state.anthropometrics.arm_radius
    return [
        (pts["shoulder"], pts["elbow"], r),
        (pts["elbow"], pts["wrist"], r),
        (pts["wrist"], pts["tip"], r * 0.8),
    ]


def body_capsules(state: HumanState) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """All collision capsules; the head is a zero-length capsule (sphere).

    The torso capsule stops a head-radius short of the head center so the
    full-width trunk does not engulf the chin and mouth area."""
    hc = head_center(state)
    up = quat_rotate(torso_rotation(state.waist), (0.0, 0.0, 1.0))
    neck = hc - state.anthropometrics.head_radius * up
    caps = [
        (state.waist_center, neck, state.anthropometrics.torso_radius),
        (hc, hc, state.anthropometrics.head_radius),
    ]
    caps.extend(arm_capsules(state, "right"))
    caps.extend(arm_capsules(state, "left"))
    return caps


def arm_surface_point(state: HumanState, side: str, arclength: float,
                      angle: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Point on the arm capsule surface at the given arclength from the shoulder.

    `angle` picks the direction around the segment axis, measured from the
    axis-perpendicular direction closest to world +z (angle 0 is the exposed
    upper surface). Returns (point, outward surface normal).
    """
    pts = arm_points(state, side)
    segs = [(pts["shoulder"], pts["elbow"]), (pts["elbow"], pts["wrist"]), (pts["wrist"], pts["tip"])]
    radius = state.anthropometrics.arm_radius
    lengths = [float(np.linalg.norm(b - a)) for a, b in segs]
    s = float(np.clip(arclength, 0.0, sum(lengths)))
    for (a, b), seg_len in zip(segs, lengths):
        if s <= seg_len or (a, b) is segs[-1]:
            axis = (b - a) / seg_len
            up = np.array([0.0, 0.0, 1.0])
            u = up - (up @ axis) * axis
            n = np.linalg.norm(u)
            if n < 1e-9:  # segment is vertical; fall back to +x
                u = np.array([1.0, 0.0, 0.0]) - (axis[0]) * axis
                u /= np.linalg.norm(u)
            else:
                u /= n
            v = np.cross(axis, u)
            normal = math.cos(angle) * u + math.sin(angle) * v
            point = a + min(s, seg_len) * axis + radius * normal
            return point, normal
        s -= seg_len
    raise AssertionError("unreachable")


def arm_length(state: HumanState, side: str) -> float:
    pts = arm_points(state, side)
    return (float(np.linalg.norm(pts["elbow"] - pts["shoulder"]))
            + float(np.linalg.norm(pts["wrist"] - pts["elbow"]))
            + float(np.linalg.norm(pts["tip"] - pts["wrist"])))


# ---------------------------------------------------------------------------
# Retargeting


def estimate_height_scale(headset_position, default_head_height: float) -> float:
    """Body scale from the headset's height above the ground."""
    z = float(np.asarray(headset_position, dtype=float).reshape(3)[2])
    if z <= 0.0:
        raise NonPositiveHeight(f"headset height must be positive, got {z}")
    if default_head_height <= 0.0:
        raise NonPositiveHeight(f"default head height must be positive, got {default_head_height}")
    return z / default_head_height


def align_waist(chi, waist_center) -> tuple[float, float, float]:
    """Waist (roll, pitch, yaw) aligning the avatar head center with chi.

    With psi = chi - waist_center:
        r = atan2(psi_y, psi_z)
        p = atan2(psi_x * cos r, psi_z)
        y = atan2(cos r, sin r * sin p)
    cos r and sin r are taken from the psi components directly so the exact
    zeros survive (atan2(0, 0) is 0 by convention, which the y term relies on
    when r = +-pi/2).
    """
    psi = np.asarray(chi, dtype=float).reshape(3) - np.asarray(waist_center, dtype=float).reshape(3)
    norm = float(np.linalg.norm(psi))
    if norm < 1e-3:
        raise DegenerateVector(f"|chi - W| = {norm:.2e} m is too small to orient the torso")
    px, py, pz = float(psi[0]), float(psi[1]), float(psi[2])
    h = math.hypot(py, pz)
    r = math.atan2(py, pz)
    if h > 0.0:
        cr, sr = pz / h, py / h
    else:
        cr, sr = 1.0, 0.0
    p = math.atan2(px * cr, pz)
    y = math.atan2(cr, sr * math.sin(p))
    return r, p, y


def align_head(theta) -> tuple[float, float, bool]:
    """Head roll/pitch joints from the measured head orientation.

    Pass-through within model limits; out-of-limit values clamp and flag the
    frame. Yaw is handled separately by split_yaw.
    """
    roll, pitch = float(theta[0]), float(theta[1])
    if not (math.isfinite(roll) and math.isfinite(pitch)):
        raise RetargetError("head orientation must be finite")
    c_roll = float(np.clip(roll, *HEAD_LIMITS[0]))
    c_pitch = float(np.clip(pitch, *HEAD_LIMITS[1]))
    return c_roll, c_pitch, (c_roll != roll or c_pitch != pitch)


def split_yaw(theta_y: float, y_psi: float) -> tuple[float, float]:
    """Distribute measured head yaw between head and waist joints (0.7 / 0.3).

    The waist share is computed as the remainder so the two parts always sum
    to theta_y - y_psi exactly.
    """
    d = theta_y - y_psi
    head_yaw = HEAD_YAW_SHARE * d
    return head_yaw, d - head_yaw


def retarget_arm(state: HumanState, hand: Pose6, side: str, previous_q,
                 params: IkParams = IkParams()) -> tuple[np.ndarray, bool]:
    """Arm joint angles placing the avatar hand at the controller pose.

    Warm-started damped-least-squares IK; non-convergence is reported as a
    quality flag, never an error, and the returned angles are always within
    limits.
    """
    chain = arm_chain(state, side)
    result = ik_dls(chain, previous_q, hand, params)
    return result.q, result.converged


@dataclass(frozen=True)
class RetargetFlags:
    head_clamped: bool = False
    left_reached: bool = True
    right_reached: bool = True


def retarget_frame(state: HumanState, tracked: TrackedInput,
                   ik_params: IkParams = IkParams()) -> tuple[HumanState, RetargetFlags]:
    """Map one tracked frame onto the avatar: waist, head, yaw split, both arms."""
    r, p, y_psi = align_waist(tracked.head.position, state.waist_center)
    theta = quat_to_rpy(tracked.head.orientation)
    roll, pitch, clamped = align_head(theta)
    head_yaw, waist_yaw = split_yaw(theta[2], y_psi)

    waist = np.array([
        np.clip(r, *WAIST_LIMITS[0]),
        np.clip(p, *WAIST_LIMITS[1]),
        np.clip(waist_yaw, *WAIST_LIMITS[2]),
    ])
    head = np.array([roll, pitch, np.clip(head_yaw, *HEAD_LIMITS[2])])
    posed = replace(state, waist=waist, head=head)

    right_q, right_ok = retarget_arm(posed, tracked.right_hand, "right", state.right_arm, ik_params)
    left_q, left_ok = retarget_arm(posed, tracked.left_hand, "left", state.left_arm, ik_params)
    new_state = replace(posed, right_arm=right_q, left_arm=left_q)
    return new_state, RetargetFlags(head_clamped=clamped, left_reached=left_ok, right_reached=right_ok)


# ---------------------------------------------------------------------------
# Biomechanics sampling


def sample_biomechanics(rng: np.random.Generator, sex: str,
                        mode: str) -> tuple[Anthropometrics, np.ndarray]:
    """Draw a training-population body: fixed 50th-percentile defaults or the
    randomized torso-height / waist-deviation population."""
    if mode not in ("fixed", "randomized"):
        raise ValueError(f"unknown biomechanics mode: {mode!r}")
    base = Anthropometrics.default(sex)
    if mode == "fixed":
        return base, np.zeros(3)
    lo, hi = TORSO_HEIGHT_RANGE[sex]
    torso = float(rng.uniform(lo, hi))
    waist = rng.uniform(-WAIST_DEVIATION_LIMIT, WAIST_DEVIATION_LIMIT, size=3)
    return replace(base, torso_height=torso), waist


# ---------------------------------------------------------------------------
# Tracked-input traces (JSON Lines)


def _pose_to_obj(pose: Pose6) -> dict:
    return {"p": [float(v) for v in pose.position], "q": [float(v) for v in pose.orientation]}


def _pose_from_obj(obj: dict) -> Pose6:
    q = np.asarray(obj["q"], dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise TraceError(f"quaternion not unit norm: {q.tolist()}")
    return Pose6(np.asarray(obj["p"], dtype=float), quat_normalize(q))


def save_trace(path, frames: list[TrackedInput]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for fr in frames:
            f.write(json.dumps({
                "t": fr.timestamp,
                "head": _pose_to_obj(fr.head),
                "left": _pose_to_obj(fr.left_hand),
                "right": _pose_to_obj(fr.right_hand),
            }) + "\n")


def load_trace(path) -> list[TrackedInput]:
    """Load a tracked-input trace, validating timestamps and quaternions."""
    frames: list[TrackedInput] = []
    last_t = -math.inf
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            t = float(obj["t"])
            frame = TrackedInput(
                head=_pose_from_obj(obj["head"]),
                left_hand=_pose_from_obj(obj["left"]),
                right_hand=_pose_from_obj(obj["right"]),
                timestamp=t,
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from exc
        if t <= last_t:
            raise TraceError(f"{path}:{lineno}: timestamps must be strictly increasing")
        last_t = t
        frames.append(frame)
    return frames
