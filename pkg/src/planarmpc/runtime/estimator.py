"""State estimation: noisy pose pass-through plus low-pass filtered
finite-difference velocities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics.model import FloatArray, ModelSpec
from ..errors import ConfigError


@dataclass(frozen=True)
class EstimatorConfig:
    position_noise_std: float = 0.0
    angle_noise_std: float = 0.0
    measurement_rate: float = 500.0
    lowpass_cutoff: float = 15.0

    def __post_init__(self) -> None:
        for name in ("position_noise_std", "angle_noise_std",
                     "measurement_rate", "lowpass_cutoff"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"EstimatorConfig.{name} must be >= 0")
        if not self.measurement_rate > 0.0:
            raise ConfigError("EstimatorConfig.measurement_rate must be > 0")


class VelocityFilterEstimator:
    """Positions pass through; velocities are first-order low-passed finite
    differences of consecutive position measurements.

    Until two measurements have arrived the velocity estimate is zero and
    ``startup`` stays True.
    """

    def __init__(self, model: ModelSpec, cfg: EstimatorConfig) -> None:
        self.model = model
        self.cfg = cfg
        self.startup = True
        self._prev_q: FloatArray | None = None
        self._prev_t: float | None = None
        self._v_filt = np.zeros(model.nv)

    def reset(self) -> None:
        self.startup = True
        self._prev_q = None
        self._prev_t = None
        self._v_filt = np.zeros(self.model.nv)

    def measure(self, x_true: FloatArray, rng: np.random.Generator
                ) -> FloatArray:
        """Sensor model: Gaussian noise on the base pose, exact joint encoders."""
        q = np.asarray(x_true[:self.model.nq], dtype=float).copy()
        if self.model.floating_base:
            q[0] += self.cfg.position_noise_std * rng.standard_normal()
            q[1] += self.cfg.position_noise_std * rng.standard_normal()
            q[2] += self.cfg.angle_noise_std * rng.standard_normal()
        return q

    def update(self, q_meas: FloatArray, t: float) -> FloatArray:
        """Fold one measurement in; returns the packed state estimate."""
        q_meas = np.asarray(q_meas, dtype=float)
        if self._prev_q is not None and t > self._prev_t:
            dt = t - self._prev_t
            v_raw = (q_meas - self._prev_q) / dt
            alpha = 1.0 - np.exp(-2.0 * np.pi * self.cfg.lowpass_cutoff * dt)
            self._v_filt = self._v_filt + alpha * (v_raw - self._v_filt)
            self.startup = False
        self._prev_q = q_meas.copy()
        self._prev_t = t
        return np.concatenate([q_meas, self._v_filt])


def estimate(measurements: FloatArray, times: FloatArray, model: ModelSpec,
             cfg: EstimatorConfig) -> tuple[FloatArray, bool]:
    """Replay a measurement history; returns (state estimate, startup flag)."""
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    est = VelocityFilterEstimator(model, cfg)
    out = model.default_state()
    for q, t in zip(measurements, np.atleast_1d(times)):
        out = est.update(q, float(t))
    return out, est.startup
