"""Solve for the per-(task, profile) home joint angles baked into
data/env_default.toml.

For each cell we place the tool at a fixed standoff from the task target
(mouth, mid-arm itch band, or mid marker), sweep candidate tool orientations,
and solve damped least-squares IK for the wrist. The exact orientation at home
does not matter to the tasks, so we keep whichever converged solution has the
most joint-limit margin while staying level enough for the particle tools.
Run after editing mounts or tool geometry, then paste the printed arrays back
into the config.
"""
from __future__ import annotations

import math
import sys

import numpy as np

from caresim import human as hm
from caresim import robot as rb
from caresim.configs import load_env_config
from caresim.envs import make_env
from caresim.geometry import Pose6, quat_from_rpy, quat_rotate
from caresim.kinematics import IkParams, ik_dls

# Particle tools must start far below the 60 deg release tilt; the other
# tools only need to avoid accidental task events, which proximity already
# rules out at the home standoff.
MAX_HOME_TILT = {"feeding": 25.0, "drinking": 25.0, "scratching": 80.0, "bathing": 60.0}
DIST_RANGE = (0.28, 0.52)


def _task_goal(task: str, env) -> np.ndarray:
    st = env.state
    if task in ("feeding", "drinking"):
        return env._mouth.copy()
    if task == "scratching":
        length = hm.arm_length(st.human, "right")
        point, _ = hm.arm_surface_point(st.human, "right", 0.5 * length, 0.0)
        return point
    return env._marker_world[len(env._marker_world) // 2].copy()


def _candidate_tips(task: str, goal: np.ndarray, base: np.ndarray) -> list[np.ndarray]:
    """Standoff positions to try, nearest-to-base first."""
    away = base - goal
    flat = away.copy()
    flat[2] = 0.0
    tips = []
    for standoff in (0.38, 0.34, 0.44):
        for lift in (0.12, 0.20, 0.0):
            d = flat / np.linalg.norm(flat)
            tips.append(goal + d * standoff + np.array([0.0, 0.0, lift]))
        tips.append(goal + standoff * away / np.linalg.norm(away))
    return tips


def _candidate_quats(task: str, goal: np.ndarray, tip: np.ndarray) -> list[np.ndarray]:
    d = goal - tip
    yaw_aim = math.atan2(d[1], d[0])
    quats = []
    if task == "scratching":
        pitch_aim = -math.atan2(d[2], math.hypot(d[0], d[1]))
        pitches = (pitch_aim, 0.0, -0.4, 0.4)
    else:
        pitches = (0.0, -0.25, 0.25)
    for dyaw in (0.0, 0.6, -0.6, 1.2, -1.2, 1.8, -1.8, 2.4, -2.4, math.pi):
        for pitch in pitches:
            quats.append(quat_from_rpy(0.0, pitch, yaw_aim + dyaw))
    return quats


def solve(task: str, profile_name: str) -> np.ndarray | None:
    env = make_env(task, profile_name, human_source="live")
    env.reset(seed=[0, 0], sex="male")
    goal = _task_goal(task, env)
    base = env.cfg.task(task).mounts[profile_name].base.position
    tool = env.state.robot.tool
    chain = env.state.robot.chain
    lo = np.array([l.limits[0] for l in chain.links])
    hi = np.array([l.limits[1] for l in chain.links])
    params = IkParams(max_iterations=150, position_tolerance=0.004,
                      orientation_tolerance=0.03)
    rng = np.random.default_rng(7)
    starts = [chain.mid_pose()] + [
        chain.clamp(chain.mid_pose() + rng.uniform(-1.0, 1.0, size=7))
        for _ in range(3)
    ]

    best_q, best_score, best_note = None, -np.inf, ""
    budget = 2000
    for tip in _candidate_tips(task, goal, base):
        for quat in _candidate_quats(task, goal, tip):
            for q0 in starts:
                if budget <= 0:
                    break
                budget -= 1
                wrist = (tip - quat_rotate(quat, tool.tip_offset)
                         - quat_rotate(quat, tool.grip_offset.position))
                res = ik_dls(chain, q0, Pose6(wrist, quat), params)
                if not res.converged:
                    continue
                rs = rb.RobotState(profile_name, chain, res.q, tool)
                dist = float(np.linalg.norm(rb.tool_point(rs) - goal))
                tilt = rb.tool_tilt_deg(rs)
                force = rb.contact_forces(rs, env._capsules).total_force
                if force > 0.0 or tilt > MAX_HOME_TILT[task]:
                    continue
                if not DIST_RANGE[0] <= dist <= DIST_RANGE[1]:
                    continue
                margin = float(np.min(np.minimum(res.q - lo, hi - res.q)))
                score = margin - 0.002 * tilt
                if score > best_score:
                    best_q, best_score = res.q, score
                    best_note = (f"dist={dist:.3f} tilt={tilt:5.1f}deg "
                                 f"force={force:.1f}N margin={margin:.2f}rad")
        # A pose with plenty of limit margin is good enough; stop searching.
        if best_score > 0.40 or budget <= 0:
            break
    if best_q is None:
        print(f"  !! {task}/{profile_name}: no acceptable home pose found", file=sys.stderr)
        return None
    print(f"{task}/{profile_name}: {best_note}")
    return best_q


def main() -> None:
    out = {}
    for task in ("feeding", "drinking", "scratching", "bathing"):
        for profile in ("armA", "armB"):
            q = solve(task, profile)
            if q is not None:
                out[(task, profile)] = q
    print()
    for (task, profile), q in out.items():
        vals = ", ".join(f"{v:.4f}" for v in q)
        print(f"[tasks.{task}.mounts.{profile}]  home_q = [{vals}]")


if __name__ == "__main__":
    main()
