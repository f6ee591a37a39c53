"""Versioned TOML configuration for environments and robot profiles, plus the
content hash stamped into episode records so replays can detect drift.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import Pose6, quat_from_rpy
from .kinematics import JointChain, load_chain

TASKS = ("feeding", "drinking", "scratching", "bathing")
PROFILES = ("armA", "armB")

_PROFILE_FILES = {"armA": "arm_a.toml", "armB": "arm_b.toml"}


class ConfigError(ValueError):
    pass


def _read_toml(path) -> dict:
    with open(path, "rb") as f:
        return tomllib.load(f)


def _bundled(name: str) -> dict:
    with resources.files("caresim.data").joinpath(name).open("rb") as f:
        return tomllib.load(f)


def canonical_hash(*docs: dict) -> str:
    """SHA-256 over the canonical JSON of parsed documents, so formatting and
    key order do not affect provenance."""
    blob = json.dumps(list(docs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MountConfig:
    base: Pose6
    home_q: np.ndarray


@dataclass(frozen=True)
class TaskConfig:
    name: str
    waist_center: np.ndarray
    neutral_waist: np.ndarray
    mounts: dict[str, MountConfig]
    tool: str


@dataclass(frozen=True)
class EnvConfig:
    """Parsed environment configuration plus the raw document it came from."""

    version: int
    dt: float
    episode_steps: int
    gravity: float
    mouth_capture_radius: float
    release_tilt_deg: float
    spill_drop: float
    particle_counts: dict[str, int]
    marker_count: int
    marker_spacing: float
    reward: dict[str, float]
    success: dict[str, tuple[int, int]]
    tasks: dict[str, TaskConfig]
    raw: dict

    def task(self, name: str) -> TaskConfig:
        try:
            return self.tasks[name]
        except KeyError:
            raise ConfigError(f"unknown task: {name!r}") from None


def _parse_env_config(doc: dict) -> EnvConfig:
    try:
        env = doc["env"]
        reward = {k: float(v) for k, v in doc["reward"].items()}
        tasks = {}
        for name in TASKS:
            t = doc["task"][name]
            mounts = {}
            for profile in PROFILES:
                m = t[profile]
                base = Pose6(np.asarray(m["base_xyz"], dtype=float),
                             quat_from_rpy(*m["base_rpy"]))
                mounts[profile] = MountConfig(base, np.asarray(m["home_q"], dtype=float))
            tasks[name] = TaskConfig(
                name=name,
                waist_center=np.asarray(t["waist_center"], dtype=float),
                neutral_waist=np.asarray(t["neutral_waist"], dtype=float),
                mounts=mounts,
                tool=str(t["tool"]),
            )
        success = {
            "feeding": (int(doc["success"]["feeding_num"]), int(doc["success"]["feeding_den"])),
            "drinking": (int(doc["success"]["drinking_num"]), int(doc["success"]["drinking_den"])),
            "scratching": (int(doc["success"]["scratch_count"]), 1),
            "bathing": (int(doc["success"]["bathing_num"]), int(doc["success"]["bathing_den"])),
        }
        return EnvConfig(
            version=int(env["version"]),
            dt=float(env["dt"]),
            episode_steps=int(env["episode_steps"]),
            gravity=float(env["gravity"]),
            mouth_capture_radius=float(env["mouth_capture_radius"]),
            release_tilt_deg=float(env["release_tilt_deg"]),
            spill_drop=float(env["spill_drop"]),
            particle_counts={"feeding": int(env["food_particles"]),
                             "drinking": int(env["water_particles"])},
            marker_count=int(env["marker_count"]),
            marker_spacing=float(env["marker_spacing"]),
            reward=reward,
            success=success,
            tasks=tasks,
            raw=doc,
        )
    except KeyError as exc:
        raise ConfigError(f"environment config missing key: {exc}") from exc


def load_env_config(path=None) -> EnvConfig:
    """Load the environment configuration; the bundled default when no path is
    given. Only schema version 1 is understood."""
    doc = _read_toml(path) if path is not None else _bundled("env_default.toml")
    cfg = _parse_env_config(doc)
    if cfg.version != 1:
        raise ConfigError(f"unsupported environment config version: {cfg.version}")
    return cfg


@dataclass(frozen=True)
class RobotProfile:
    name: str
    chain: JointChain
    raw: dict


def load_robot_profile(name_or_path: str) -> RobotProfile:
    """Load a robot arm profile: a bundled name (armA, armB) or a TOML path."""
    if name_or_path in _PROFILE_FILES:
        doc = _bundled(_PROFILE_FILES[name_or_path])
    else:
        p = Path(name_or_path)
        if not p.exists():
            raise ConfigError(f"unknown robot profile: {name_or_path!r}")
        doc = _read_toml(p)
    try:
        name = str(doc["profile"]["name"])
        chain = load_chain(doc)
    except KeyError as exc:
        raise ConfigError(f"robot profile missing key: {exc}") from exc
    return RobotProfile(name=name, chain=chain, raw=doc)


def config_hash(env_cfg: EnvConfig, profile: RobotProfile) -> str:
    return canonical_hash(env_cfg.raw, profile.raw)
