"""Serial-chain forward kinematics, geometric Jacobians, and damped-least-squares IK.

Used by both the simulated human's arms (retargeting) and the assisting robot.
All operations are pure functions over value inputs and are safe to call
concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Pose6,
    quat_conjugate,
    quat_from_axis_angle,
    quat_multiply,
    quat_rotate,
    quat_to_axis_angle_vector,
)

AXIS_NORM_TOL = 1e-9


class KinematicsError(ValueError):
    pass


class DimensionMismatch(KinematicsError):
    pass


class JointLimitViolation(KinematicsError):
    def __init__(self, index: int, value: float, lo: float, hi: float):
        self.index = index
        super().__init__(f"joint {index}: {value:.6f} outside [{lo:.6f}, {hi:.6f}]")


@dataclass(frozen=True)
class Link:
    """One revolute joint: fixed offset from the parent frame, then rotation about axis."""

    offset: Pose6
    axis: np.ndarray
    limits: tuple[float, float]

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > AXIS_NORM_TOL:
            raise KinematicsError(f"joint axis not unit norm: {axis}")
        lo, hi = self.limits
        if lo > hi:
            raise KinematicsError(f"joint limits reversed: ({lo}, {hi})")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "limits", (float(lo), float(hi)))
        # plain-float views used by the scalar FK inner loop
        object.__setattr__(self, "_off_p", tuple(float(v) for v in self.offset.position))
        oq = tuple(float(v) for v in self.offset.orientation)
        object.__setattr__(self, "_off_q", oq)
        object.__setattr__(self, "_off_identity",
                           abs(oq[0]) + abs(oq[1]) + abs(oq[2]) + abs(oq[3] - 1.0) < 1e-12)
        object.__setattr__(self, "_axis_t", tuple(float(v) for v in axis))


@dataclass(frozen=True)
class JointChain:
    """Serial chain of revolute joints with a base pose and a tool-frame offset."""

    links: tuple[Link, ...]
    base: Pose6 = field(default_factory=Pose6.identity)
    ee_offset: Pose6 = field(default_factory=Pose6.identity)

    def __post_init__(self):
        if len(self.links) < 1:
            raise KinematicsError("chain needs at least one joint")
        object.__setattr__(self, "links", tuple(self.links))

    def __len__(self) -> int:
        return len(self.links)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([lk.limits[0] for lk in self.links])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([lk.limits[1] for lk in self.links])

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower_limits, self.upper_limits)

    def mid_pose(self) -> np.ndarray:
        return 0.5 * (self.lower_limits + self.upper_limits)

    def with_base(self, base: Pose6) -> "JointChain":
        return JointChain(self.links, base, self.ee_offset)


def _check_q(chain: JointChain, q, enforce_limits: bool = True) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != len(chain):
        raise DimensionMismatch(f"expected {len(chain)} joint values, got {q.shape[0]}")
    if enforce_limits:
        for i, lk in enumerate(chain.links):
            lo, hi = lk.limits
            # tiny slack so clamped values survive round-tripping
            if q[i] < lo - 1e-12 or q[i] > hi + 1e-12:
                raise JointLimitViolation(i, float(q[i]), lo, hi)
    return q


def _fk_raw(chain: JointChain, q) -> tuple[list, list, np.ndarray, np.ndarray]:
    """Joint frame origins/orientations plus the end-effector frame, as raw
    arrays. Kinematics is the simulator's hot loop, so everything here is
    written-out scalar math; the Pose6 wrapper is applied only at the public
    boundary."""
    bp, bq = chain.base.position, chain.base.orientation
    px, py, pz = float(bp[0]), float(bp[1]), float(bp[2])
    qx, qy, qz, qw = float(bq[0]), float(bq[1]), float(bq[2]), float(bq[3])
    origins, orients = [], []
    for qi, lk in zip(q, chain.links):
        ox, oy, oz = lk._off_p
        tx = 2.0 * (qy * oz - qz * oy)
        ty = 2.0 * (qz * ox - qx * oz)
        tz = 2.0 * (qx * oy - qy * ox)
        px += ox + qw * tx + qy * tz - qz * ty
        py += oy + qw * ty + qz * tx - qx * tz
        pz += oz + qw * tz + qx * ty - qy * tx
        if not lk._off_identity:
            bx, by, bz, bw = lk._off_q
            qx, qy, qz, qw = (qw * bx + qx * bw + qy * bz - qz * by,
                              qw * by - qx * bz + qy * bw + qz * bx,
                              qw * bz + qx * by - qy * bx + qz * bw,
                              qw * bw - qx * bx - qy * by - qz * bz)
        ax, ay, az = lk._axis_t
        half = 0.5 * float(qi)
        s, c = math.sin(half), math.cos(half)
        bx, by, bz, bw = ax * s, ay * s, az * s, c
        qx, qy, qz, qw = (qw * bx + qx * bw + qy * bz - qz * by,
                          qw * by - qx * bz + qy * bw + qz * bx,
                          qw * bz + qx * by - qy * bx + qz * bw,
                          qw * bw - qx * bx - qy * by - qz * bz)
        n = 1.0 / math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
        qx *= n
        qy *= n
        qz *= n
        qw *= n
        origins.append(np.array([px, py, pz]))
        orients.append(np.array([qx, qy, qz, qw]))
    rot = orients[-1]
    ee_p = origins[-1] + quat_rotate(rot, chain.ee_offset.position)
    ee_q = quat_multiply(rot, chain.ee_offset.orientation)
    ee_q = ee_q / math.sqrt(float(ee_q @ ee_q))
    return origins, orients, ee_p, ee_q


def forward_kinematics(chain: JointChain, q) -> tuple[list[Pose6], Pose6]:
    """Poses of every joint frame (after its rotation) and the end-effector frame.

    Joint values outside the chain's limits raise JointLimitViolation rather
    than clamping.
    """
    q = _check_q(chain, q)
    origins, orients, ee_p, ee_q = _fk_raw(chain, q)
    poses = [Pose6(p, r) for p, r in zip(origins, orients)]
    return poses, Pose6(ee_p, ee_q)


def _jacobian_raw(chain: JointChain, origins, orients, ee_p) -> np.ndarray:
    n = len(chain)
    J = np.zeros((6, n))
    for i, lk in enumerate(chain.links):
        # rotation about the joint axis leaves the axis itself fixed, so the
        # post-rotation frame orients it correctly
        ax, ay, az = quat_rotate(orients[i], lk.axis)
        rx, ry, rz = ee_p - origins[i]
        J[0, i] = ay * rz - az * ry
        J[1, i] = az * rx - ax * rz
        J[2, i] = ax * ry - ay * rx
        J[3, i] = ax
        J[4, i] = ay
        J[5, i] = az
    return J


def jacobian(chain: JointChain, q) -> np.ndarray:
    """Geometric Jacobian, 6 x n: linear velocity rows on top, angular below.

    Column i is (axis_i x (p_ee - p_i), axis_i) with everything in the world
    frame.
    """
    q = _check_q(chain, q)
    origins, orients, ee_p, _ = _fk_raw(chain, q)
    return _jacobian_raw(chain, origins, orients, ee_p)


@dataclass(frozen=True)
class IkParams:
    """Damped-least-squares solver knobs.

    Defaults are sized for warm-started tracking at 10 Hz: light damping,
    half steps, tolerances of 5 mm and 0.02 rad.
    """

    damping: float = 0.05
    max_iterations: int = 100
    position_tolerance: float = 0.005
    orientation_tolerance: float = 0.02
    step_scale: float = 0.5

    def __post_init__(self):
        if self.damping < 0:
            raise KinematicsError("damping must be >= 0")
        if self.max_iterations <= 0:
            raise KinematicsError("max_iterations must be > 0")
        if self.position_tolerance <= 0 or self.orientation_tolerance <= 0:
            raise KinematicsError("tolerances must be > 0")
        if not (0.0 < self.step_scale <= 1.0):
            raise KinematicsError("step_scale must be in (0, 1]")


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    residual: tuple[float, float]  # (meters, radians)
    converged: bool
    iterations: int


def ik_dls(chain: JointChain, q0, target: Pose6, params: IkParams = IkParams()) -> IkResult:
    """Iterative damped-least-squares inverse kinematics.

    Each iteration applies dq = J^T (J J^T + damping^2 I)^-1 e, scaled by
    step_scale, then clamps to joint limits. Unreachable targets are not an
    error: the best iterate seen is returned with converged=False.
    """
    q = chain.clamp(_check_q(chain, q0))
    lam2 = params.damping * params.damping
    eye6 = np.eye(6)

    best_q = q.copy()
    best_err = None
    best_res = (float("inf"), float("inf"))
    iterations = 0
    tp, tq = target.position, target.orientation
    for iterations in range(params.max_iterations + 1):
        origins, orients, ee_p, ee_q = _fk_raw(chain, q)
        dq_rot = quat_to_axis_angle_vector(quat_multiply(tq, quat_conjugate(ee_q)))
        e = np.concatenate([tp - ee_p, dq_rot])
        pos_err = float(np.linalg.norm(e[:3]))
        ori_err = float(np.linalg.norm(e[3:]))
        score = pos_err + ori_err
        if best_err is None or score < best_err:
            best_err = score
            best_q = q.copy()
            best_res = (pos_err, ori_err)
        if pos_err <= params.position_tolerance and ori_err <= params.orientation_tolerance:
            return IkResult(q, (pos_err, ori_err), True, iterations)
        if iterations == params.max_iterations:
            break
        J = _jacobian_raw(chain, origins, orients, ee_p)
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * eye6, e)
        q = chain.clamp(q + params.step_scale * dq)

    return IkResult(best_q, best_res, False, iterations)


def load_chain(table: dict) -> JointChain:
    """Build a JointChain from a parsed chain-config table.

    Schema (version 1):
        version = 1
        [base]            optional: xyz = [3], rpy = [3]
        [ee_offset]       optional: xyz = [3], rpy = [3]
        [[joints]]        one per joint, in order:
            xyz = [3]     offset from parent frame, meters
            rpy = [3]     offset orientation, radians
            axis = [3]    rotation axis in the joint frame
            limits = [lo, hi]   radians
    """
    version = table.get("version")
    if version != 1:
        raise KinematicsError(f"unsupported chain config version: {version!r}")
    joints = table.get("joints")
    if not joints:
        raise KinematicsError("chain config has no joints")
    links = []
    for j in joints:
        axis = np.asarray(j["axis"], dtype=float)
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise KinematicsError("joint axis must be nonzero")
        links.append(Link(
            offset=Pose6.from_xyz_rpy(j.get("xyz", (0, 0, 0)), j.get("rpy", (0, 0, 0))),
            axis=axis / n,
            limits=(float(j["limits"][0]), float(j["limits"][1])),
        ))

    def pose_of(key: str) -> Pose6:
        sub = table.get(key)
        if sub is None:
            return Pose6.identity()
        return Pose6.from_xyz_rpy(sub.get("xyz", (0, 0, 0)), sub.get("rpy", (0, 0, 0)))

    return JointChain(tuple(links), base=pose_of("base"), ee_offset=pose_of("ee_offset"))
