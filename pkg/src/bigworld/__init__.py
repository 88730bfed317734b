"""Interactivity-seeking continual learning and a small universal-local environment toolkit."""

__version__ = "0.1.0"

from .interactivity import (  # noqa: E402
    InteractivityEstimate,
    RolloutTrace,
    dynamic_complexity,
    interactivity_estimate,
    policy_objective,
    rollout,
    static_complexity,
)
from .loop import ExperimentConfig, final_window_mean, run_control, run_experiment  # noqa: E402

__all__ = [
    "InteractivityEstimate",
    "RolloutTrace",
    "dynamic_complexity",
    "interactivity_estimate",
    "policy_objective",
    "rollout",
    "static_complexity",
    "ExperimentConfig",
    "run_control",
    "run_experiment",
    "final_window_mean",
]
