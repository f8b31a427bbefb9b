"""Asynchronous MPC runtime: estimator, episode executive, logs."""

from .clocks import ClockConfig
from .episode import DisturbanceEvent, RunOptions, control_tick, run_episode
from .estimator import EstimatorConfig, VelocityFilterEstimator, estimate
from .log import EpisodeLog

__all__ = [
    "ClockConfig", "DisturbanceEvent", "EpisodeLog", "EstimatorConfig", "RunOptions",
    "VelocityFilterEstimator", "control_tick", "estimate", "run_episode",
]
