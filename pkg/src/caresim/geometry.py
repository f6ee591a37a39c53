"""Rigid-body poses and quaternion math shared by the avatar and robot kinematics.

Conventions: world frame is z-up with the person facing +x. Quaternions are
stored scalar-last (x, y, z, w) and kept unit norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


class GeometryError(ValueError):
    pass


def quat_identity() -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise GeometryError("cannot normalize zero quaternion")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a*b, both scalar-last."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_conjugate(q) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by quaternion q (q must be unit norm)."""
    ux, uy, uz, w = float(q[0]), float(q[1]), float(q[2]), float(q[3])
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    # q v q* expanded with the crosses written out; this sits on the hot path
    # of every kinematics call, so no np.cross here.
    tx = 2.0 * (uy * vz - uz * vy)
    ty = 2.0 * (uz * vx - ux * vz)
    tz = 2.0 * (ux * vy - uy * vx)
    return np.array([
        vx + w * tx + uy * tz - uz * ty,
        vy + w * ty + uz * tx - ux * tz,
        vz + w * tz + ux * ty - uy * tx,
    ])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise GeometryError("rotation axis must be nonzero")
    half = 0.5 * angle
    s = np.sin(half) / n
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, np.cos(half)])


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_to_axis_angle_vector(q) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, safe near identity.

    Near the identity sin(theta/2) ~ theta/2, so the vector part scaled by 2
    is already the rotation vector; the general branch divides by the norm.
    """
    q = np.asarray(q, dtype=float)
    if q[3] < 0.0:  # take the short way around
        q = -q
    v = q[:3]
    s = np.linalg.norm(v)
    w = min(q[3], 1.0)
    if s < 1e-9:
        return 2.0 * v
    angle = 2.0 * np.arctan2(s, w)
    return v * (angle / s)


def quat_angle(q) -> float:
    """Absolute rotation angle in radians encoded by a unit quaternion."""
    return float(np.linalg.norm(quat_to_axis_angle_vector(q)))


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic z-y-x (yaw, pitch, roll) Euler angles to quaternion."""
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), pitch)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), roll)
    return quat_multiply(quat_multiply(qz, qy), qx)


def quat_to_rpy(q) -> tuple[float, float, float]:
    """Inverse of quat_from_rpy; returns (roll, pitch, yaw)."""
    m = quat_to_matrix(q)
    pitch = -np.arcsin(np.clip(m[2, 0], -1.0, 1.0))
    if abs(m[2, 0]) < 1.0 - 1e-12:
        roll = np.arctan2(m[2, 1], m[2, 2])
        yaw = np.arctan2(m[1, 0], m[0, 0])
    else:
        # gimbal lock: fold yaw into roll
        roll = np.arctan2(-m[1, 2], m[1, 1])
        yaw = 0.0
    return float(roll), float(pitch), float(yaw)


@dataclass(frozen=True)
class Pose6:
    """Rigid-body pose: position in meters plus unit quaternion orientation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        if abs(math.sqrt(float(q @ q)) - 1.0) > QUAT_NORM_TOL:
            raise GeometryError(f"quaternion not unit norm: {q}")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose6":
        return Pose6(np.zeros(3), quat_identity())

    @staticmethod
    def from_xyz_rpy(xyz, rpy) -> "Pose6":
        return Pose6(np.asarray(xyz, dtype=float), quat_from_rpy(*rpy))

    def compose(self, other: "Pose6") -> "Pose6":
        """self then other (other expressed in self's frame)."""
        return Pose6(
            self.position + quat_rotate(self.orientation, other.position),
            quat_normalize(quat_multiply(self.orientation, other.orientation)),
        )

    def inverse(self) -> "Pose6":
        qi = quat_conjugate(self.orientation)
        return Pose6(-quat_rotate(qi, self.position), qi)

    def transform_point(self, p) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, np.asarray(p, dtype=float))

    def almost_equal(self, other: "Pose6", tol: float = 1e-9) -> bool:
        if np.linalg.norm(self.position - other.position) > tol:
            return False
        d = quat_multiply(other.orientation, quat_conjugate(self.orientation))
        return quat_angle(d) <= tol


def pose_error(target: Pose6, current: Pose6) -> np.ndarray:
    """6-vector (linear; angular) error taking current toward target.

    Angular part is the rotation vector of target * current^-1, which is
    well-behaved near identity.
    """
    dp = target.position - current.position
    dq = quat_multiply(target.orientation, quat_conjugate(current.orientation))
    return np.concatenate([dp, quat_to_axis_angle_vector(dq)])


def point_segment_distance(p, a, b) -> float:
    """Distance from point p to segment [a, b]."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))
