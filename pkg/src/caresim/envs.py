"""Four assistive-task environments: feeding, drinking, itch scratching, and
bed bathing. One control step is 0.1 s; an episode is exactly 200 steps with
the robot acting and the human either holding a sampled static pose (training)
or being driven externally (live sessions and replays).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import human as hm
from . import robot as rb
from .configs import EnvConfig, RobotProfile, config_hash, load_env_config, load_robot_profile
from .geometry import Pose6, point_segment_distance, quat_to_rpy
from .human import Anthropometrics, HumanState, sample_biomechanics
from .robot import RobotState, apply_action, contact_forces, standard_tool, tool_point, tool_pose

HELD, FREE, CAPTURED, SPILLED = 0, 1, 2, 3
STATUS_NAMES = ("held", "free", "captured", "spilled")

OBS_DIM = {"feeding": 21, "drinking": 21, "scratching": 27, "bathing": 27}

# Static-pose randomization ranges drawn at reset. Feeding/drinking vary the
# head; scratching/bathing vary the right arm (seated vs supine ranges).
HEAD_POSE_RANGES = np.array([[-0.15, 0.15], [-0.15, 0.15], [-0.40, 0.40]])
SEATED_ARM_RANGES = np.array([
    [-0.90, 0.30], [-1.00, 0.10], [-0.50, 0.50], [-1.60, -0.20],
    [-0.50, 0.50], [-0.40, 0.40], [-0.30, 0.30],
])
SUPINE_ARM_RANGES = np.array([
    [-0.25, 0.25], [-0.30, 0.05], [-0.30, 0.30], [-0.80, -0.05],
    [-0.30, 0.30], [-0.30, 0.30], [-0.20, 0.20],
])

# Itch placement margins: arclength inset from the arm ends, and the angular
# band around the exposed upper surface (the side-mounted arm cannot pass
# through the body to reach the far underside).
ITCH_END_MARGIN = 0.03
ITCH_ANGLE_RANGE = (-math.pi / 2, math.pi / 2)
MARKER_START_OFFSET = 0.02


class EnvError(ValueError):
    pass


class EpisodeFinished(EnvError):
    pass


class EpisodeNotFinished(EnvError):
    pass


@dataclass(frozen=True)
class EnvState:
    task: str
    human: HumanState
    robot: RobotState
    particles_pos: np.ndarray      # (n, 3) world
    particles_vel: np.ndarray      # (n, 3)
    particles_status: np.ndarray   # (n,) int codes
    particle_slots: np.ndarray     # (n, 3) tool-frame rest positions
    marker_s: np.ndarray           # (m,) arclengths along the right arm
    marker_wiped: np.ndarray       # (m,) bool
    itch_s: float
    itch_angle: float
    scratch_count: int
    t: int
    cumulative_reward: float
    last_force: float
    biomech_mode: str
    human_source: str


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def _draw_sex(rng: np.random.Generator) -> str:
    return "male" if int(rng.integers(0, 2)) == 0 else "female"


def _canonical_quat(q: np.ndarray) -> np.ndarray:
    return -q if q[3] < 0.0 else q


class Env:
    """One task environment bound to a robot profile and a configuration.

    Holds the current EnvState plus geometry caches keyed to the current human
    pose; all caches are rebuilt whenever the human changes.
    """

    def __init__(self, task: str, profile, cfg: EnvConfig | None = None,
                 biomech_mode: str = "fixed", human_source: str = "static"):
        if task not in OBS_DIM:
            raise EnvError(f"unknown task: {task!r}")
        if biomech_mode not in ("fixed", "randomized"):
            raise EnvError(f"unknown biomechanics mode: {biomech_mode!r}")
        if human_source not in ("static", "live"):
            raise EnvError(f"unknown human source: {human_source!r}")
        self.task = task
        self.cfg = cfg if cfg is not None else load_env_config()
        self.profile = profile if isinstance(profile, RobotProfile) else load_robot_profile(profile)
        self.biomech_mode = biomech_mode
        self.human_source = human_source
        self.config_hash = config_hash(self.cfg, self.profile)
        self.state: EnvState | None = None
        self._capsules: list = []
        self._mouth = np.zeros(3)
        self._marker_world = np.zeros((0, 3))
        self._marker_normals = np.zeros((0, 3))
        self._itch_world = np.zeros(3)
        self._itch_normal = np.array([0.0, 0.0, 1.0])

    @property
    def obs_dim(self) -> int:
        return OBS_DIM[self.task]

    @property
    def action_dim(self) -> int:
        return 7

    # -- reset ---------------------------------------------------------------

    def reset(self, seed, sex: str | None = None) -> np.ndarray:
        """Start a fresh episode. `seed` is anything numpy's default_rng
        accepts. Random draws happen in a fixed order (sex, body, pose, itch)
        so a seed pins the whole initial state."""
        rng = np.random.default_rng(seed)
        tc = self.cfg.task(self.task)

        if sex is None:
            sex = _draw_sex(rng)
        anthro, waist_dev = sample_biomechanics(rng, sex, self.biomech_mode)
        waist = np.clip(np.asarray(tc.neutral_waist) + waist_dev,
                        hm.WAIST_LIMITS[:, 0], hm.WAIST_LIMITS[:, 1])
        human_st = HumanState.neutral(anthro, tc.waist_center, waist)

        mount = tc.mounts[self.profile.name]
        robot_st = RobotState(
            profile=self.profile.name,
            chain=self.profile.chain.with_base(mount.base),
            q=mount.home_q,
            tool=standard_tool(tc.tool),
        )

        if self.human_source == "static":
            if self.task in ("feeding", "drinking"):
                head = rng.uniform(HEAD_POSE_RANGES[:, 0], HEAD_POSE_RANGES[:, 1])
                human_st = replace(human_st, head=head)
            else:
                ranges = SEATED_ARM_RANGES if self.task == "scratching" else SUPINE_ARM_RANGES
                # redraw poses that spawn the arm into the parked tool
                for _ in range(8):
                    arm = rng.uniform(ranges[:, 0], ranges[:, 1])
                    cand = replace(human_st, right_arm=arm)
                    if contact_forces(robot_st, hm.body_capsules(cand)).total_force == 0.0:
                        break
                human_st = cand

        n = self.cfg.particle_counts.get(self.task, 0)
        slots = rb.particle_slots(robot_st.tool, n)
        tpose = tool_pose(robot_st)
        pos = np.array([tpose.transform_point(s) for s in slots]).reshape(n, 3)
        vel = np.zeros((n, 3))
        status = np.full(n, HELD, dtype=np.int64)

        if self.task == "bathing":
            length = hm.arm_length(human_st, "right")
            count = self.cfg.marker_count
            span = MARKER_START_OFFSET + (count - 1) * self.cfg.marker_spacing
            if span > length:
                count = max(1, int((length - MARKER_START_OFFSET) / self.cfg.marker_spacing) + 1)
            marker_s = MARKER_START_OFFSET + self.cfg.marker_spacing * np.arange(count)
        else:
            marker_s = np.zeros(0)

        if self.task == "scratching":
            length = hm.arm_length(human_st, "right")
            itch_s = float(rng.uniform(ITCH_END_MARGIN, length - ITCH_END_MARGIN))
            itch_angle = float(rng.uniform(*ITCH_ANGLE_RANGE))
        else:
            itch_s, itch_angle = 0.0, 0.0

        self.state = EnvState(
            task=self.task,
            human=human_st,
            robot=robot_st,
            particles_pos=pos,
            particles_vel=vel,
            particles_status=status,
            particle_slots=slots,
            marker_s=marker_s,
            marker_wiped=np.zeros(len(marker_s), dtype=bool),
            itch_s=itch_s,
            itch_angle=itch_angle,
            scratch_count=0,
            t=0,
            cumulative_reward=0.0,
            last_force=0.0,
            biomech_mode=self.biomech_mode,
            human_source=self.human_source,
        )
        self._rebuild_human_caches()
        force = contact_forces(robot_st, self._capsules).total_force
        self.state = replace(self.state, last_force=force)
        return self.observe()

    def _rebuild_human_caches(self) -> None:
        st = self.state
        self._capsules = hm.body_capsules(st.human)
        self._mouth = hm.mouth_point(st.human)
        if len(st.marker_s):
            pts, nrm = [], []
            for s in st.marker_s:
                p, n = hm.arm_surface_point(st.human, "right", float(s), 0.0)
                pts.append(p)
                nrm.append(n)
            self._marker_world = np.array(pts)
            self._marker_normals = np.array(nrm)
        if self.task == "scratching":
            self._itch_world, self._itch_normal = hm.arm_surface_point(
                st.human, "right", st.itch_s, st.itch_angle)

    def set_human(self, human_st: HumanState) -> None:
        """Replace the human pose (live retargeting or replay); waist center
        and particle/marker bookkeeping are untouched."""
        if self.state is None:
            raise EnvError("reset before set_human")
        self.state = replace(self.state, human=human_st)
        self._rebuild_human_caches()

    # -- observation ---------------------------------------------------------

    def observe(self) -> np.ndarray:
        st = self.state
        pose = tool_pose(st.robot)
        common = [
            st.robot.q,
            pose.position,
            _canonical_quat(pose.orientation),
            [st.last_force],
        ]
        if self.task in ("feeding", "drinking"):
            block = [hm.head_center(st.human), quat_to_rpy(hm.head_orientation(st.human))]
        else:
            pts = hm.arm_points(st.human, "right")
            block = [pts["shoulder"], pts["elbow"], pts["wrist"], self._shaping_target()]
        obs = np.concatenate([np.asarray(part, dtype=float).ravel() for part in common + block])
        if obs.shape[0] != self.obs_dim or not np.all(np.isfinite(obs)):
            raise EnvError(f"bad observation for {self.task}: shape {obs.shape}")
        return obs

    def _shaping_target(self) -> np.ndarray:
        """World point the distance-shaping term pulls the tool toward."""
        st = self.state
        if self.task in ("feeding", "drinking"):
            return self._mouth
        if self.task == "scratching":
            return self._itch_world
        unwiped = ~st.marker_wiped
        if not np.any(unwiped):
            return hm.arm_points(st.human, "right")["wrist"]
        tp = tool_point(st.robot)
        cand = self._marker_world[unwiped]
        return cand[int(np.argmin(np.linalg.norm(cand - tp, axis=1)))]

    # -- stepping ------------------------------------------------------------

    def step(self, action) -> Transition:
        st = self.state
        if st is None:
            raise EnvError("reset before step")
        if st.t >= self.cfg.episode_steps:
            raise EpisodeFinished(f"episode already at step {st.t}")

        prev_tool = tool_point(st.robot)
        robot_st = apply_action(st.robot, action)
        tpose = tool_pose(robot_st)
        tp = tool_point(robot_st)
        tilt = rb.tool_tilt_deg(robot_st)

        pos, vel, status, n_captured, n_spilled = step_particles(
            self.cfg, st.particles_pos, st.particles_vel, st.particles_status,
            st.particle_slots, tpose, tilt, self._mouth)

        scratched = 0
        scratch_count = st.scratch_count
        if self.task == "scratching":
            if float(np.linalg.norm(tp - self._itch_world)) <= self.cfg.reward["scratch_radius"]:
                disp = tp - prev_tool
                tang = disp - (disp @ self._itch_normal) * self._itch_normal
                if float(np.linalg.norm(tang)) >= self.cfg.reward["scratch_min_tangential"]:
                    scratched = 1
                    scratch_count += 1

        marker_wiped = st.marker_wiped
        n_wiped = 0
        if self.task == "bathing" and len(marker_wiped):
            face_center, face_up = rb.wipe_face(robot_st)
            cos_max = math.cos(math.radians(self.cfg.reward["wipe_max_angle_deg"]))
            near = np.linalg.norm(self._marker_world - face_center, axis=1) <= self.cfg.reward["wipe_radius"]
            aligned = self._marker_normals @ face_up >= cos_max
            fresh = near & aligned & ~marker_wiped
            n_wiped = int(np.count_nonzero(fresh))
            if n_wiped:
                marker_wiped = marker_wiped | fresh

        force = contact_forces(robot_st, self._capsules).total_force
        reward = self._reward(tp, tilt, force, n_captured, n_spilled, scratched, n_wiped,
                              marker_wiped)

        new_state = EnvState(
            task=st.task, human=st.human, robot=robot_st,
            particles_pos=pos, particles_vel=vel, particles_status=status,
            particle_slots=st.particle_slots,
            marker_s=st.marker_s, marker_wiped=marker_wiped,
            itch_s=st.itch_s, itch_angle=st.itch_angle,
            scratch_count=scratch_count,
            t=st.t + 1,
            cumulative_reward=st.cumulative_reward + reward,
            last_force=force,
            biomech_mode=st.biomech_mode, human_source=st.human_source,
        )
        self.state = new_state
        done = new_state.t >= self.cfg.episode_steps
        info = {
            "force": force,
            "tilt_deg": tilt,
            "events": {"captured": n_captured, "spilled": n_spilled,
                       "scratched": scratched, "wiped": n_wiped},
        }
        return Transition(self.observe(), reward, done, info)

    def _reward(self, tp, tilt, force, n_captured, n_spilled, scratched, n_wiped,
                marker_wiped) -> float:
        rw = self.cfg.reward
        if self.task == "bathing":
            unwiped = ~marker_wiped
            if np.any(unwiped):
                d = float(np.min(np.linalg.norm(self._marker_world[unwiped] - tp, axis=1)))
            else:
                d = 0.0
        else:
            d = float(np.linalg.norm(self._shaping_target() - tp))

        r = -rw["w_distance"] * d
        r += rw["capture"] * n_captured - rw["spill"] * n_spilled
        r += rw["scratch"] * scratched + rw["wipe"] * n_wiped

        cap = rw["force_cap"]
        if self.task == "scratching":
            if float(np.linalg.norm(tp - self._itch_world)) <= rw["near_itch_radius"]:
                cap = rw["force_cap_near_itch"]
        r -= rw["w_force"] * max(0.0, force - cap)

        if self.task == "drinking":
            if float(np.linalg.norm(self._mouth - tp)) <= rw["tilt_gate"]:
                r += rw["w_tilt"] * min(tilt / self.cfg.release_tilt_deg, 1.0)
        return float(r)

    # -- episode summary -----------------------------------------------------

    def success(self) -> bool:
        """Task success at episode end; thresholds are inclusive and evaluated
        in integer arithmetic so the 75% / 30% boundaries are exact."""
        st = self.state
        if st is None or st.t < self.cfg.episode_steps:
            raise EpisodeNotFinished("success is defined only at episode end")
        return success_of(self.cfg, st)

    def snapshot(self) -> dict:
        """JSON-ready full state dump used for determinism checks and the wire
        protocol."""
        st = self.state
        return {
            "task": st.task,
            "t": st.t,
            "human_q": [float(v) for v in st.human.joint_vector()],
            "robot_q": [float(v) for v in st.robot.q],
            "tool_pose": _pose_list(tool_pose(st.robot)),
            "particles": [
                {"p": [float(x) for x in p], "status": STATUS_NAMES[int(s)]}
                for p, s in zip(st.particles_pos, st.particles_status)
            ],
            "markers": [
                {"p": [float(x) for x in p], "wiped": bool(w)}
                for p, w in zip(self._marker_world, st.marker_wiped)
            ],
            "scratch_count": st.scratch_count,
            "cumulative_reward": st.cumulative_reward,
            "force": st.last_force,
        }

    def serialize_state(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)


def _pose_list(pose: Pose6) -> dict:
    return {"p": [float(v) for v in pose.position], "q": [float(v) for v in pose.orientation]}


def success_of(cfg: EnvConfig, st: EnvState) -> bool:
    if st.task in ("feeding", "drinking"):
        num, den = cfg.success[st.task]
        captured = int(np.count_nonzero(st.particles_status == CAPTURED))
        return captured * den >= num * len(st.particles_status)
    if st.task == "scratching":
        return st.scratch_count >= cfg.success["scratching"][0]
    num, den = cfg.success["bathing"]
    wiped = int(np.count_nonzero(st.marker_wiped))
    return wiped * den >= num * len(st.marker_wiped)


def step_particles(cfg: EnvConfig, pos, vel, status, slots, utensil: Pose6,
                   tilt_deg: float, mouth) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """One dt of particle bookkeeping.

    Held particles ride the utensil and are released (from rest) when the tilt
    exceeds the release angle. Free particles take one semi-implicit Euler
    step under gravity; capture tests the swept segment against the mouth ball
    so fast particles cannot tunnel through it. Captured and spilled are
    absorbing.
    """
    n = len(status)
    if n == 0:
        return pos, vel, status, 0, 0
    pos = pos.copy()
    vel = vel.copy()
    status = status.copy()
    mouth = np.asarray(mouth, dtype=float)
    dt = cfg.dt
    release = tilt_deg > cfg.release_tilt_deg
    spill_z = utensil.transform_point(np.zeros(3))[2] - cfg.spill_drop
    captured = spilled = 0

    for i in range(n):
        s = status[i]
        if s == HELD:
            pos[i] = utensil.transform_point(slots[i])
            if release:
                status[i] = FREE
                vel[i] = 0.0
                s = FREE
            else:
                continue
        if s != FREE:
            continue
        prev = pos[i].copy()
        vel[i, 2] -= cfg.gravity * dt
        pos[i] = prev + vel[i] * dt
        if point_segment_distance(mouth, prev, pos[i]) <= cfg.mouth_capture_radius:
            status[i] = CAPTURED
            vel[i] = 0.0
            captured += 1
        elif pos[i, 2] < spill_z:
            status[i] = SPILLED
            vel[i] = 0.0
            spilled += 1
    return pos, vel, status, captured, spilled


def make_env(task: str, profile: str = "armA", biomech_mode: str = "fixed",
             human_source: str = "static", cfg: EnvConfig | None = None) -> Env:
    return Env(task, profile, cfg=cfg, biomech_mode=biomech_mode, human_source=human_source)
