"""Wheelchair- or table-mounted 7-DoF assistive arm, its task tools, and the
penalty-based contact model used for force feedback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose6, point_segment_distance, quat_rotate
from .kinematics import JointChain, forward_kinematics

# Per-joint action clip, radians per control step.
DELTA_MAX = 0.05

# Linear penalty stiffness for tool/body contact, N/m of penetration.
CONTACT_STIFFNESS = 1000.0


@dataclass(frozen=True)
class Tool:
    """Rigid tool mounted at the wrist.

    grip_offset: wrist frame -> tool frame.
    tip_offset: tool frame -> working point (bowl center, cup rim, scratcher
    tip, or wipe-face center).
    contact_radius: radius of the contact sphere at the working point.
    face_half_extent: only meaningful for the wiper's flat bottom face.
    """

    name: str
    grip_offset: Pose6
    tip_offset: np.ndarray
    contact_radius: float
    face_half_extent: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tip_offset", np.asarray(self.tip_offset, dtype=float).reshape(3))


def standard_tool(name: str) -> Tool:
    """Tool geometry by task name. The tool +z axis is its 'up': particles stay
    put while up stays near world up, and the wiper's bottom face points -z."""
    grip = Pose6(np.array([0.0, 0.0, 0.03]))
    if name == "spoon":
        return Tool(name, grip, (0.09, 0.0, 0.0), 0.02)
    if name == "cup":
        return Tool(name, grip, (0.0, 0.0, 0.05), 0.035)
    if name == "scratcher":
        return Tool(name, grip, (0.12, 0.0, 0.0), 0.015)
    if name == "wiper":
        # face hangs below the flange so it can press down without the wrist
        # having to pass through the surface being wiped
        return Tool(name, grip, (0.0, 0.0, -0.12), 0.02, face_half_extent=0.04)
    raise ValueError(f"unknown tool: {name!r}")


@dataclass(frozen=True)
class RobotState:
    """Arm profile name, kinematic chain with its mount pose folded in, current
    joint angles, and the mounted tool."""

    profile: str
    chain: JointChain
    q: np.ndarray
    tool: Tool
    # memoized wrist FK; every tool helper funnels through it
    _wrist: Pose6 | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(len(self.chain.links))
        object.__setattr__(self, "q", self.chain.clamp(q))


def apply_action(state: RobotState, delta) -> RobotState:
    """Apply a per-joint position delta, clipped to +-DELTA_MAX and clamped to
    joint limits. Non-finite actions are rejected."""
    d = np.asarray(delta, dtype=float).reshape(len(state.chain.links))
    if not np.all(np.isfinite(d)):
        raise ValueError("action contains non-finite values")
    d = np.clip(d, -DELTA_MAX, DELTA_MAX)
    return RobotState(state.profile, state.chain, state.chain.clamp(state.q + d), state.tool)


def wrist_pose(state: RobotState) -> Pose6:
    if state._wrist is None:
        _, ee = forward_kinematics(state.chain, state.q)
        object.__setattr__(state, "_wrist", ee)
    return state._wrist


def tool_pose(state: RobotState) -> Pose6:
    return wrist_pose(state).compose(state.tool.grip_offset)


def tool_point(state: RobotState) -> np.ndarray:
    return tool_pose(state).transform_point(state.tool.tip_offset)


def tool_up(state: RobotState) -> np.ndarray:
    return quat_rotate(tool_pose(state).orientation, (0.0, 0.0, 1.0))


def tool_tilt_deg(state: RobotState) -> float:
    """Angle in degrees between the tool up axis and world up. 0 is level."""
    up = tool_up(state)
    return math.degrees(math.acos(float(np.clip(up[2], -1.0, 1.0))))


def wipe_face(state: RobotState) -> tuple[np.ndarray, np.ndarray]:
    """Center of the wiper's bottom face and the tool up axis (the face
    presses along -up)."""
    pose = tool_pose(state)
    return pose.transform_point(state.tool.tip_offset), quat_rotate(pose.orientation, (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class ContactReport:
    total_force: float
    max_penetration: float
    contact_count: int


def contact_forces(state: RobotState, capsules: list[tuple[np.ndarray, np.ndarray, float]]) -> ContactReport:
    """Penalty contact between the tool sphere and body capsules:
    F = CONTACT_STIFFNESS * penetration, summed over contacts."""
    center = tool_point(state)
    radius = state.tool.contact_radius
    total = 0.0
    deepest = 0.0
    count = 0
    for a, b, r in capsules:
        dist = point_segment_distance(center, a, b)
        pen = (radius + r) - dist
        if pen > 0.0:
            total += CONTACT_STIFFNESS * pen
            deepest = max(deepest, pen)
            count += 1
    return ContactReport(total_force=total, max_penetration=deepest, contact_count=count)


def particle_slots(tool: Tool, count: int) -> np.ndarray:
    """Tool-frame rest positions for held particles, generated on a golden-angle
    spiral so any count spreads evenly. Spoon slots sit in the bowl around the
    working point; cup slots fill the interior below the rim."""
    if count <= 0:
        return np.zeros((0, 3))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    slots = np.zeros((count, 3))
    if tool.name == "cup":
        for i in range(count):
            t = (i + 0.5) / count
            r = 0.025 * math.sqrt(t)
            a = golden * i
            slots[i] = (r * math.cos(a), r * math.sin(a), 0.05 - 0.045 * t)
        return slots
    base = np.asarray(tool.tip_offset, dtype=float)
    for i in range(count):
        t = (i + 0.5) / count
        r = 0.016 * math.sqrt(t)
        a = golden * i
        slots[i] = base + (r * math.cos(a), r * math.sin(a), 0.004)
    return slots
