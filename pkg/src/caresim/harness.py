"""Batch evaluation and episode replay.

Evaluation derives one seed per episode from (seed, index), so results are
order-independent and any single episode can be reproduced in isolation.
Replay re-simulates a recorded episode from its header and reports the first
step where anything disagrees.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .configs import EnvConfig, load_env_config
from .envs import Env
from .human import Anthropometrics, HumanState
from .policy import ObsDimMismatch, Policy, policy_forward, sample_action
from .records import EpisodeRecord, MetricsRow, make_header
from .robot import DELTA_MAX


class ConfigHashMismatch(ValueError):
    pass


def _episode_seed(seed: int, index: int) -> list[int]:
    return [int(seed), int(index), 0]


def _action_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), 1]))


def run_episode(env: Env, policy: Policy, env_seed, action_rng=None,
                stochastic: bool = True) -> EpisodeRecord:
    """One full episode; returns its record (header seed is whatever was
    passed, so replays can rebuild the same reset)."""
    if env.obs_dim != policy.obs_dim:
        raise ObsDimMismatch(
            f"policy obs dim {policy.obs_dim} does not match task {env.task!r} ({env.obs_dim})")
    obs = env.reset(env_seed)
    steps = []
    total = 0.0
    for t in range(env.cfg.episode_steps):
        if stochastic:
            action, _, _ = sample_action(policy, obs, action_rng)
        else:
            action, _, _ = policy_forward(policy, obs)
        # record the applied command, not the raw sample: past the per-step
        # clip the raw value carries no information, and canonical actions let
        # replay verify the action field itself
        applied = np.clip(np.asarray(action, dtype=float), -DELTA_MAX, DELTA_MAX)
        tr = env.step(applied)
        steps.append({
            "t": t,
            "obs": [float(v) for v in obs],
            "action": [float(v) for v in applied],
            "reward": float(tr.reward),
            "force": float(tr.info["force"]),
            "events": tr.info["events"],
        })
        total += float(tr.reward)
        obs = tr.observation
    header = make_header(env.config_hash, env_seed, env.task, env.profile.name,
                         policy.policy_id, env.biomech_mode, env.human_source,
                         env.cfg.episode_steps,
                         extra={"stochastic": stochastic})
    footer = {"cumulative_reward": total, "success": env.success()}
    return EpisodeRecord(header, steps, footer)


def evaluate(policy: Policy, robot_profile: str, episodes: int, seed: int,
             biomech_mode: str = "fixed", task: str | None = None,
             stochastic: bool = True, cfg: EnvConfig | None = None,
             ) -> tuple[MetricsRow, list[EpisodeRecord]]:
    """Run `episodes` rollouts with per-episode derived seeds and aggregate."""
    task = task or policy.task
    env = Env(task, robot_profile, cfg=cfg, biomech_mode=biomech_mode)
    records = []
    for i in range(episodes):
        rec = run_episode(env, policy, _episode_seed(seed, i),
                          action_rng=_action_rng(seed, i), stochastic=stochastic)
        records.append(rec)
    rewards = [r.footer["cumulative_reward"] for r in records]
    successes = [bool(r.footer["success"]) for r in records]
    row = MetricsRow(
        task=task, robot_profile=env.profile.name, policy_id=policy.policy_id,
        episodes=episodes,
        mean_reward=float(np.mean(rewards)) if rewards else 0.0,
        success_rate=(sum(successes) / episodes) if episodes else 0.0,
    )
    return row, records


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    divergence_step: int | None = None
    field: str | None = None
    message: str = ""


def _human_from_row(row: dict, anthro: Anthropometrics, waist_center) -> HumanState:
    q = np.asarray(row["human_q"], dtype=float)
    return HumanState(anthropometrics=anthro, waist=q[0:3], head=q[3:6],
                      right_arm=q[6:13], left_arm=q[13:20], waist_center=waist_center)


def replay(record: EpisodeRecord, cfg: EnvConfig | None = None) -> ReplayReport:
    """Re-simulate a recorded episode and compare every derived quantity.

    The header's config hash must match the installed configuration; records
    from a different configuration raise ConfigHashMismatch before any
    simulation happens. Comparison is exact: JSON round-trips floats
    losslessly, so a clean replay matches bit for bit.
    """
    record.validate()
    h = record.header
    cfg = cfg if cfg is not None else load_env_config()
    env = Env(h["task"], h["robot_profile"], cfg=cfg,
              biomech_mode=h["biomech_mode"], human_source=h["human_source"])
    if env.config_hash != h["config_hash"]:
        raise ConfigHashMismatch(
            f"record was made with config {h['config_hash'][:12]}..., "
            f"installed is {env.config_hash[:12]}...")

    seed = h["seed"]
    obs = env.reset(seed if not isinstance(seed, list) else [int(s) for s in seed])

    live = h["human_source"] == "live"
    anthro = None
    if live:
        if "anthro" not in h:
            return ReplayReport(False, None, "header", "live record lacks anthropometrics")
        anthro = Anthropometrics(**h["anthro"])

    total = 0.0
    for i, row in enumerate(record.steps):
        if live:
            if "human_q" not in row:
                return ReplayReport(False, i, "human_q", "live record row lacks human_q")
            env.set_human(_human_from_row(row, anthro, env.cfg.task(env.task).waist_center))
            obs = env.observe()
        got = [float(v) for v in obs]
        if got != [float(v) for v in row["obs"]]:
            return ReplayReport(False, i, "obs", f"observation diverged at step {i}")
        action = np.asarray(row["action"], dtype=float)
        # recorded actions are post-clip, so out-of-bound values are forgeries
        if not np.all(np.isfinite(action)) or np.any(np.abs(action) > DELTA_MAX):
            return ReplayReport(False, i, "action",
                                f"action outside command bounds at step {i}")
        tr = env.step(action)
        if float(tr.reward) != float(row["reward"]):
            return ReplayReport(False, i, "reward", f"reward diverged at step {i}")
        if float(tr.info["force"]) != float(row["force"]):
            return ReplayReport(False, i, "force", f"force diverged at step {i}")
        if tr.info["events"] != {k: int(v) for k, v in row["events"].items()}:
            return ReplayReport(False, i, "events", f"events diverged at step {i}")
        total += tr.reward
        obs = tr.observation

    if abs(total - float(record.footer["cumulative_reward"])) > 1e-9:
        return ReplayReport(False, None, "cumulative_reward", "footer reward mismatch")
    if env.success() != bool(record.footer["success"]):
        return ReplayReport(False, None, "success", "footer success flag mismatch")
    return ReplayReport(True, message="clean replay")
