"""Simulation lab for assistive manipulation around a tracked human avatar."""

__version__ = "0.1.0"

from .configs import EnvConfig, RobotProfile, config_hash, load_env_config, load_robot_profile
from .envs import Env, EnvState, make_env
from .harness import evaluate, replay, run_episode
from .human import Anthropometrics, HumanState, retarget_frame, sample_biomechanics
from .policy import Policy, load_policy, save_policy
from .ppo import TrainConfig, train
from .robot import RobotState, standard_tool
from .stats import wilcoxon_signed_rank

__all__ = [
    "Anthropometrics",
    "Env",
    "EnvConfig",
    "EnvState",
    "HumanState",
    "Policy",
    "RobotProfile",
    "RobotState",
    "TrainConfig",
    "config_hash",
    "evaluate",
    "load_env_config",
    "load_policy",
    "load_robot_profile",
    "make_env",
    "replay",
    "retarget_frame",
    "run_episode",
    "sample_biomechanics",
    "save_policy",
    "standard_tool",
    "train",
    "wilcoxon_signed_rank",
]
