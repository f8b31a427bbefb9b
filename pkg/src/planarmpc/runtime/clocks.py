"""Loop rates, latency, and scheduling mode of the asynchronous runtime."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ConfigError


@dataclass(frozen=True)
class ClockConfig:
    planner_rate: float = 50.0
    control_rate: float = 300.0
    sim_rate: float = 1000.0
    command_latency: float = 0.003
    mode: str = "simulated"          # simulated | wallclock
    planner_budget: Optional[float] = None  # simulated compute budget; None = one period

    def __post_init__(self) -> None:
        if not (self.sim_rate >= self.control_rate >= self.planner_rate > 0):
            raise ConfigError(
                "need sim_rate >= control_rate >= planner_rate > 0")
        if self.command_latency < 0:
            raise ConfigError("command_latency must be >= 0")
        if self.mode not in ("simulated", "wallclock"):
            raise ConfigError("clock mode must be simulated|wallclock")

    @property
    def planner_period(self) -> float:
        return 1.0 / self.planner_rate

    @property
    def budget(self) -> float:
        return self.planner_period if self.planner_budget is None \
            else self.planner_budget
