"""Finite-difference linearization of dynamics (and residuals) along a
trajectory, with optional knot skipping and interpolation.

The dynamics are only ever probed through ``step``; every probe is counted,
so evaluation accounting in telemetry is exact. All perturbations for one
knot are evaluated as a single batch, and when a residual function is
supplied it is evaluated at the same perturbed points, so dynamics and
residual Jacobians come out of one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .dynamics.model import FloatArray
from .errors import ConfigError, DynamicsError

FORWARD = "forward"
CENTERED = "centered"


class DiscreteDynamics(Protocol):
    """What the linearizer and solver need from a dynamics backend."""

    nx: int
    nu: int

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray: ...

    def step_batch(self, X: FloatArray, U: FloatArray) -> FloatArray: ...


@dataclass(frozen=True)
class FdConfig:
    """Finite-difference settings: perturbation size, scheme, knot skipping."""

    epsilon: float = 1.0e-6
    scheme: str = FORWARD
    skip_deriv: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ConfigError("FdConfig.epsilon must be > 0")
        if self.scheme not in (FORWARD, CENTERED):
            raise ConfigError(f"FdConfig.scheme must be forward|centered, "
                              f"got '{self.scheme}'")
        if self.skip_deriv < 0:
            raise ConfigError("FdConfig.skip_deriv must be >= 0")


@dataclass
class EvalCounter:
    """Exact count of dynamics step evaluations (one per batch row)."""

    steps: int = 0

    def add(self, n: int) -> None:
        self.steps += n


@dataclass
class LinearizedDynamics:
    """Per-knot state/control Jacobians plus which knots were evaluated."""

    A: FloatArray               # (T, nx, nx)
    B: FloatArray               # (T, nx, nu)
    evaluated_mask: np.ndarray  # (T,) bool; False = interpolated

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise DynamicsError("non-finite dynamics Jacobian")


def _perturbation_stack(x: FloatArray, u: FloatArray, eps: float,
                        scheme: str) -> tuple[FloatArray, FloatArray]:
    """Rows: [baseline?, x+eps*ei ..., u+eps*ej ...] (doubled for centered)."""
    nx, nu = x.shape[0], u.shape[0]
    if scheme == FORWARD:
        X = np.tile(x, (1 + nx + nu, 1))
        U = np.tile(u, (1 + nx + nu, 1))
        for i in range(nx):
            X[1 + i, i] += eps
        for j in range(nu):
            U[1 + nx + j, j] += eps
    else:
        X = np.tile(x, (2 * (nx + nu), 1))
        U = np.tile(u, (2 * (nx + nu), 1))
        for i in range(nx):
            X[2 * i, i] += eps
            X[2 * i + 1, i] -= eps
        for j in range(nu):
            U[2 * (nx + j), j] += eps
            U[2 * (nx + j) + 1, j] -= eps
    return X, U


def fd_jacobians(dyn: DiscreteDynamics, x: FloatArray, u: FloatArray,
                 cfg: FdConfig, counter: EvalCounter | None = None,
                 residual_fn: Optional[Callable[[FloatArray, FloatArray], FloatArray]] = None,
                 ) -> tuple:
    """A = df/dx, B = df/du at one knot; optionally residual Jacobians too.

    Forward scheme costs ``nx + nu + 1`` step evaluations, centered costs
    ``2(nx + nu)``. ``residual_fn`` is a batched map (B, nx), (B, nu) ->
    (B, nr); when given it is evaluated at the same perturbed points
    (single pass) and ``(A, B, (r0, Jrx, Jru))`` is returned.

    Raises DynamicsError annotated with the offending coordinate when a
    perturbed evaluation fails.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    nx, nu = dyn.nx, dyn.nu
    eps = cfg.epsilon
    X, U = _perturbation_stack(x, u, eps, cfg.scheme)
    try:
        F = dyn.step_batch(X, U)
    except DynamicsError:
        # Identify the failing coordinate for the error message.
        for row in range(X.shape[0]):
            try:
                dyn.step(X[row], U[row])
            except DynamicsError as exc:
                if counter is not None:
                    counter.add(row + 1)
                coord = _row_coordinate(row, nx, nu, cfg.scheme)
                raise DynamicsError(
                    f"dynamics failed while perturbing {coord}") from exc
        raise
    if counter is not None:
        counter.add(X.shape[0])

    A = np.empty((nx, nx))
    B = np.empty((nx, nu))
    if cfg.scheme == FORWARD:
        f0 = F[0]
        for i in range(nx):
            A[:, i] = (F[1 + i] - f0) / eps
        for j in range(nu):
            B[:, j] = (F[1 + nx + j] - f0) / eps
    else:
        for i in range(nx):
            A[:, i] = (F[2 * i] - F[2 * i + 1]) / (2 * eps)
        for j in range(nu):
            k = 2 * (nx + j)
            B[:, j] = (F[k] - F[k + 1]) / (2 * eps)

    if residual_fn is None:
        return A, B
    R = residual_fn(X, U)
    nr = R.shape[1]
    Jrx = np.empty((nr, nx))
    Jru = np.empty((nr, nu))
    if cfg.scheme == FORWARD:
        r0 = R[0]
        for i in range(nx):
            Jrx[:, i] = (R[1 + i] - r0) / eps
        for j in range(nu):
            Jru[:, j] = (R[1 + nx + j] - r0) / eps
    else:
        r0 = residual_fn(x[None], u[None])[0]
        for i in range(nx):
            Jrx[:, i] = (R[2 * i] - R[2 * i + 1]) / (2 * eps)
        for j in range(nu):
            k = 2 * (nx + j)
            Jru[:, j] = (R[k] - R[k + 1]) / (2 * eps)
    return A, B, (r0, Jrx, Jru)


def _row_coordinate(row: int, nx: int, nu: int, scheme: str) -> str:
    if scheme == FORWARD:
        if row == 0:
            return "the baseline point"
        if row <= nx:
            return f"state coordinate {row - 1}"
        return f"control coordinate {row - 1 - nx}"
    idx = row // 2
    if idx < nx:
        return f"state coordinate {idx}"
    return f"control coordinate {idx - nx}"


def evaluation_knots(T: int, skip: int) -> list[int]:
    """Knots evaluated exactly: 0, s+1, 2(s+1), ... and always T-1."""
    knots = list(range(0, T, skip + 1))
    if knots[-1] != T - 1:
        knots.append(T - 1)
    return knots


def linearize_trajectory(dyn: DiscreteDynamics, states: FloatArray,
                         controls: FloatArray, cfg: FdConfig,
                         counter: EvalCounter | None = None,
                         ) -> LinearizedDynamics:
    """Linearize along a trajectory, skipping and interpolating knots.

    With ``skip_deriv = s`` only every (s+1)-th knot (plus the final knot) is
    evaluated; the rest are filled by per-entry linear interpolation in the
    knot index between the nearest evaluated pair.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    T = controls.shape[0]
    if states.shape[0] != T + 1:
        raise ConfigError(
            f"trajectory has {states.shape[0]} states for {T} controls")

    A = np.zeros((T, dyn.nx, dyn.nx))
    B = np.zeros((T, dyn.nx, dyn.nu))
    mask = np.zeros(T, dtype=bool)
    knots = evaluation_knots(T, cfg.skip_deriv)
    for t in knots:
        A[t], B[t] = fd_jacobians(dyn, states[t], controls[t], cfg, counter)
        mask[t] = True
    for lo, hi in zip(knots[:-1], knots[1:]):
        for t in range(lo + 1, hi):
            w = (t - lo) / (hi - lo)
            A[t] = A[lo] + w * (A[hi] - A[lo])
            B[t] = B[lo] + w * (B[hi] - B[lo])
    return LinearizedDynamics(A=A, B=B, evaluated_mask=mask)
