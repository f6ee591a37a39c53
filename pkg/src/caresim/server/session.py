"""Session state machine for live trials, independent of any transport.

A session is a fold over (seed, inbound messages, tick boundaries): message
handling queues input and moves phases, tick() advances the simulation exactly
one control step. The WebSocket layer owns wall-clock timing; everything here
is deterministic, which is what makes trials replayable from a message log.

Phases move monotonically: lobby -> practice -> trial -> questionnaire -> done
(practice may be skipped).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path

import numpy as np

from ..configs import PROFILES, TASKS, EnvConfig, load_env_config
from ..envs import Env
from ..geometry import GeometryError, Pose6, quat_normalize
from ..human import (
    TORSO_HARD_RANGE,
    DegenerateVector,
    TrackedInput,
    head_center,
    retarget_frame,
)
from ..policy import Policy, policy_forward, sample_action
from ..robot import DELTA_MAX
from ..records import (
    EpisodeRecord,
    QuestionnaireRecord,
    append_questionnaire,
    make_header,
    write_episodes,
)

PROTOCOL_VERSION = 1
PHASES = ("lobby", "practice", "trial", "questionnaire", "done")

# Sanity bounds on the estimated body scale from the first tracked frame.
SCALE_RANGE = (0.5, 2.0)


class SessionExpired(RuntimeError):
    pass


@dataclass
class SessionDeps:
    """Everything a session needs from its host: loadable policies, record
    sinks, and the environment configuration."""

    policies: dict[str, Policy]
    env_cfg: EnvConfig
    record_dir: Path | None = None
    stochastic: bool = False


@dataclass
class Session:
    sid: str
    seed: int = 0
    phase: str = "lobby"
    env: Env | None = None
    policy: Policy | None = None
    pending_input: TrackedInput | None = None
    last_input_t: float = -math.inf
    rejected_poses: int = 0
    scale: float | None = None
    trial_rows: list = field(default_factory=list)
    trial_index: int = 0
    trial_seed: object = None
    action_rng: np.random.Generator | None = None

    def _advance(self, phase: str) -> None:
        if PHASES.index(phase) < PHASES.index(self.phase):
            raise SessionExpired(f"phase cannot move back from {self.phase} to {phase}")
        self.phase = phase


def create_session(sid: str, seed: int = 0) -> Session:
    return Session(sid=sid, seed=seed)


def _error(sess: Session, text: str) -> list[dict]:
    return [{"type": "error", "sid": sess.sid, "error": text}]


def _config_message(sess: Session, deps: SessionDeps) -> dict:
    return {
        "type": "config",
        "sid": sess.sid,
        "version": PROTOCOL_VERSION,
        "tasks": list(TASKS),
        "profiles": list(PROFILES),
        "policies": sorted(deps.policies),
        "episode_steps": deps.env_cfg.episode_steps,
        "dt": deps.env_cfg.dt,
    }


def _state_message(sess: Session, reward: float = 0.0) -> dict:
    snap = sess.env.snapshot()
    return {"type": "state", "sid": sess.sid, "phase": sess.phase,
            "reward": reward, **snap}


def _parse_pose(obj: dict) -> Pose6:
    q = np.asarray(obj["q"], dtype=float)
    return Pose6(np.asarray(obj["p"], dtype=float), quat_normalize(q))


def handle_message(sess: Session, msg: dict, deps: SessionDeps) -> list[dict]:
    """Apply one inbound message; returns the outbound messages. Malformed or
    out-of-phase messages produce an error reply and change nothing."""
    if not isinstance(msg, dict) or "type" not in msg:
        return _error(sess, "message must be an object with a 'type'")
    mtype = msg["type"]
    if mtype != "hello" and msg.get("sid") != sess.sid:
        return _error(sess, "unknown or missing sid")

    if mtype == "hello":
        return [_config_message(sess, deps)]

    if mtype == "start":
        return _handle_start(sess, msg, deps)

    if mtype == "pose":
        return _handle_pose(sess, msg)

    if mtype == "questionnaire":
        return _handle_questionnaire(sess, msg, deps)

    if mtype == "stop":
        sess._advance("done")
        return [{"type": "result", "sid": sess.sid, "kind": "stopped", "phase": sess.phase}]

    return _error(sess, f"unknown message type {mtype!r}")


def _handle_start(sess: Session, msg: dict, deps: SessionDeps) -> list[dict]:
    practice = bool(msg.get("practice", False))
    target_phase = "practice" if practice else "trial"
    if PHASES.index(target_phase) < PHASES.index(sess.phase) or sess.phase in ("questionnaire", "done"):
        return _error(sess, f"cannot start a {target_phase} from phase {sess.phase}")
    task = msg.get("task")
    profile = msg.get("robot", PROFILES[0])
    policy_id = msg.get("policy_id")
    if task not in TASKS:
        return _error(sess, f"unknown task {task!r}")
    if profile not in PROFILES:
        return _error(sess, f"unknown robot profile {profile!r}")
    if policy_id not in deps.policies:
        return _error(sess, f"unknown policy {policy_id!r}")
    policy = deps.policies[policy_id]
    if policy.task != task:
        return _error(sess, f"policy {policy_id!r} was trained for {policy.task!r}, not {task!r}")

    env = Env(task, profile, cfg=deps.env_cfg, biomech_mode="fixed", human_source="live")
    seed = int(msg.get("seed", sess.seed))
    env.reset([seed, sess.trial_index], sex=str(msg.get("sex", "male")))
    if sess.scale is not None:
        # keep the operator's estimated body scale across practice and trial
        human = env.state.human
        env.set_human(dc_replace(human, anthropometrics=human.anthropometrics.scaled(sess.scale)))
    sess.env = env
    sess.policy = policy
    sess.trial_seed = [seed, sess.trial_index]
    sess.trial_rows = []
    sess.action_rng = np.random.default_rng(np.random.SeedSequence([seed, sess.trial_index, 7]))
    sess._advance(target_phase)
    return [_state_message(sess)]


def _handle_pose(sess: Session, msg: dict) -> list[dict]:
    if sess.phase not in ("lobby", "practice", "trial"):
        return _error(sess, f"pose not accepted in phase {sess.phase}")
    try:
        t = float(msg["t"])
        frame = TrackedInput(
            head=_parse_pose(msg["head"]),
            left_hand=_parse_pose(msg["left"]),
            right_hand=_parse_pose(msg["right"]),
            timestamp=t,
        )
    except (KeyError, TypeError, ValueError, GeometryError) as exc:
        return _error(sess, f"bad pose message: {exc}")
    if t <= sess.last_input_t:
        sess.rejected_poses += 1
        return _error(sess, f"non-monotone pose timestamp {t}")
    sess.last_input_t = t
    sess.pending_input = frame
    if sess.env is not None and sess.scale is None and sess.phase != "trial":
        _apply_height_scale(sess, frame)
    return []


def _apply_height_scale(sess: Session, frame: TrackedInput) -> None:
    """Scale the avatar once, from the first tracked frame before the trial;
    during a trial the body is frozen so records stay self-consistent."""
    human = sess.env.state.human
    default_height = float(head_center(human)[2])
    z = float(frame.head.position[2])
    if default_height <= 0.0 or z <= 0.0:
        return
    # clamp so the scaled torso stays representable, not just "reasonable"
    torso = human.anthropometrics.torso_height
    lo = max(SCALE_RANGE[0], TORSO_HARD_RANGE[0] / torso)
    hi = min(SCALE_RANGE[1], TORSO_HARD_RANGE[1] / torso)
    scale = min(max(z / default_height, lo), hi)
    sess.env.set_human(dc_replace(human, anthropometrics=human.anthropometrics.scaled(scale)))
    sess.scale = scale


def _handle_questionnaire(sess: Session, msg: dict, deps: SessionDeps) -> list[dict]:
    if sess.phase != "questionnaire":
        return _error(sess, f"questionnaire not accepted in phase {sess.phase}")
    responses = msg.get("responses")
    try:
        rec = QuestionnaireRecord(
            session_id=sess.sid,
            trial_id=f"{sess.sid}-{sess.trial_index}",
            responses={k: int(v) for k, v in dict(responses or {}).items()},
        )
    except (TypeError, ValueError) as exc:
        return _error(sess, f"bad questionnaire: {exc}")
    if deps.record_dir is not None:
        append_questionnaire(Path(deps.record_dir) / "questionnaires.jsonl", rec)
    sess._advance("done")
    return [{"type": "result", "sid": sess.sid, "kind": "questionnaire-accepted",
             "phase": sess.phase}]


def tick(sess: Session, deps: SessionDeps) -> list[dict]:
    """Advance the simulation one control step: retarget the freshest queued
    input (hold the last pose otherwise), apply the policy action, step the
    environment, and emit the state snapshot. Completing a trial emits the
    result and persists the episode record."""
    if sess.phase not in ("practice", "trial"):
        raise SessionExpired(f"tick in phase {sess.phase}")
    env = sess.env
    if env.state.t >= env.cfg.episode_steps:
        return []  # finished practice; waiting for the client to start the trial
    out: list[dict] = []

    if sess.pending_input is not None:
        frame = sess.pending_input
        sess.pending_input = None
        try:
            new_human, _flags = retarget_frame(env.state.human, frame)
            env.set_human(new_human)
        except DegenerateVector:
            pass  # hold the previous pose on degenerate input

    obs = env.observe()
    if deps.stochastic:
        action, _, _ = sample_action(sess.policy, obs, sess.action_rng)
    else:
        action, _, _ = policy_forward(sess.policy, obs)
    # canonical (post-clip) command: what the arm actually does, and what
    # replay validates against the per-step bound
    action = np.clip(np.asarray(action, dtype=float), -DELTA_MAX, DELTA_MAX)
    t_index = env.state.t
    tr = env.step(action)

    if sess.phase == "trial":
        sess.trial_rows.append({
            "t": t_index,
            "obs": [float(v) for v in obs],
            "action": [float(v) for v in action],
            "reward": float(tr.reward),
            "force": float(tr.info["force"]),
            "events": tr.info["events"],
            "human_q": [float(v) for v in env.state.human.joint_vector()],
        })

    out.append(_state_message(sess, reward=float(tr.reward)))

    if tr.done:
        success = env.success()
        if sess.phase == "trial":
            _write_trial_record(sess, deps, success)
            sess._advance("questionnaire")
        out.append({"type": "result", "sid": sess.sid, "phase": sess.phase,
                    "practice": sess.phase == "practice",
                    "success": bool(success),
                    "cumulative_reward": float(env.state.cumulative_reward)})
    return out


def _write_trial_record(sess: Session, deps: SessionDeps, success: bool) -> None:
    env = sess.env
    anthro = env.state.human.anthropometrics
    header = make_header(
        env.config_hash, sess.trial_seed, env.task, env.profile.name,
        sess.policy.policy_id, env.biomech_mode, "live", env.cfg.episode_steps,
        extra={"anthro": {
            "sex": anthro.sex, "torso_height": anthro.torso_height,
            "upper_arm": anthro.upper_arm, "forearm": anthro.forearm,
            "hand": anthro.hand, "shoulder_half_width": anthro.shoulder_half_width,
            "shoulder_drop": anthro.shoulder_drop, "arm_radius": anthro.arm_radius,
            "torso_radius": anthro.torso_radius, "head_radius": anthro.head_radius,
            "mouth_offset": anthro.mouth_offset,
            "total_height_scale": anthro.total_height_scale,
        }, "session_id": sess.sid},
    )
    footer = {"cumulative_reward": float(env.state.cumulative_reward), "success": bool(success)}
    record = EpisodeRecord(header, sess.trial_rows, footer)
    sess.trial_index += 1
    if deps.record_dir is not None:
        path = Path(deps.record_dir) / "episodes.jsonl"
        write_episodes(path, [record], append=True)
