"""Multi-agent mirror-descent policy optimization with trust region decomposition."""

from .buffer import ReplayBuffer
from .config import ExperimentConfig
from .divergence import (
    StationarityReport,
    joint_bound_margin,
    joint_kl_exact,
    joint_kl_meanfield,
    kl,
    others_joint_kl,
    stationarity_report,
    transition_kl,
)
from .envs import make_env
from .mamd import MamdLearner
from .mamt import MamtLearner
from .runner import dilemma_study, run_experiment, run_single

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "MamdLearner",
    "MamtLearner",
    "ReplayBuffer",
    "StationarityReport",
    "dilemma_study",
    "joint_bound_margin",
    "joint_kl_exact",
    "joint_kl_meanfield",
    "kl",
    "make_env",
    "others_joint_kl",
    "run_experiment",
    "run_single",
    "stationarity_report",
    "transition_kl",
]
