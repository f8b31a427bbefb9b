"""Single-shooting iLQR with Gauss-Newton cost curvature.

Each plan step performs exactly one iteration: re-root the warm-started
trajectory at the latest state, time-shift it by the elapsed knots,
linearize dynamics (finite differences, optionally skipping knots) and cost
(analytic norms over FD residual Jacobians), run one Riccati backward pass,
and accept the first line-search candidate that decreases the cost. No
convergence checks: the previous solution warm-starts the next call.

An offline multi-iteration mode (:meth:`Planner.solve`) repeats iterations
to convergence for trajectory design and the swing-up test problems.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .cost import CostBreakdown, CostDerivatives
from .derivs import DiscreteDynamics, EvalCounter, FdConfig, \
    evaluation_knots, fd_jacobians, LinearizedDynamics
from .dynamics.model import FloatArray
from .errors import ConfigError, DynamicsError


@dataclass(frozen=True)
class SolverConfig:
    horizon: int = 35
    dt: float = 0.01
    alphas: tuple[float, ...] = (1.0, 0.5, 0.25, 0.1, 0.03, 0.01)
    reg_init: float = 1.0e-6
    reg_min: float = 1.0e-8
    reg_max: float = 1.0e8
    fd: FdConfig = field(default_factory=FdConfig)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.dt > 0.0:
            raise ConfigError("dt must be > 0")
        if not self.alphas or self.alphas[0] != 1.0:
            raise ConfigError("line-search alphas must start at 1.0")
        if any(a2 >= a1 for a1, a2 in zip(self.alphas, self.alphas[1:])):
            raise ConfigError("line-search alphas must be strictly descending")
        if not all(0.0 < a <= 1.0 for a in self.alphas):
            raise ConfigError("line-search alphas must lie in (0, 1]")
        if not (0.0 < self.reg_min <= self.reg_init <= self.reg_max):
            raise ConfigError("need 0 < reg_min <= reg_init <= reg_max")


@dataclass
class Trajectory:
    """Dynamically feasible nominal trajectory (states re-roll from controls)."""

    states: FloatArray    # (T+1, nx)
    controls: FloatArray  # (T, nu)
    dt: float
    t0: float
    total_cost: float
    per_term: dict[str, float] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    def times(self) -> FloatArray:
        return self.t0 + self.dt * np.arange(self.horizon + 1)


@dataclass
class FeedbackPolicy:
    """Time-varying LQR gains around a reference trajectory.

    The improvement ``k`` is already folded into the nominal controls at
    line-search acceptance; executors apply feedback only:
    ``u = u_ref[t] + K[t] @ (x - x_ref[t])``.
    """

    K: FloatArray      # (T, nu, nx)
    k: FloatArray      # (T, nu)
    alpha: float
    timestamp: float

    @staticmethod
    def zero(T: int, nx: int, nu: int, timestamp: float) -> "FeedbackPolicy":
        return FeedbackPolicy(K=np.zeros((T, nu, nx)), k=np.zeros((T, nu)),
                              alpha=0.0, timestamp=timestamp)


@dataclass
class SolveTelemetry:
    """Per-plan-step record mirroring the per-phase timing breakdown."""

    cost: float
    baseline_cost: float
    alpha: float
    reg: float
    expected_decrease: float
    fd_evals: int
    rollout_evals: int
    degraded: bool
    costspec_version: int
    time_model_derivs: Optional[float] = None
    time_cost_derivs: Optional[float] = None
    time_backward: Optional[float] = None
    time_rollout: Optional[float] = None

    def phase_times(self) -> dict[str, Optional[float]]:
        return {
            "model_derivs": self.time_model_derivs,
            "cost_derivs": self.time_cost_derivs,
            "backward_pass": self.time_backward,
            "rollouts": self.time_rollout,
        }


@dataclass
class PlanSolution:
    trajectory: Trajectory
    policy: FeedbackPolicy
    timestamp: float
    solution_id: int
    costspec_version: int
    telemetry: SolveTelemetry
    degraded: bool = False


class RegularizationNeeded(Exception):
    """Backward pass hit an indefinite Quu; retry with larger reg."""


@dataclass
class BackwardPassResult:
    K: FloatArray
    k: FloatArray
    dv1: float  # -sum k' Qu      (alpha-linear coefficient)
    dv2: float  # -1/2 sum k' Quu k

    def expected_decrease(self, alpha: float) -> float:
        return alpha * self.dv1 + alpha * alpha * self.dv2


def backward_pass(lin: LinearizedDynamics, cd: CostDerivatives,
                  reg: float) -> BackwardPassResult:
    """Riccati recursion over the linearized problem.

    Raises RegularizationNeeded when the regularized Quu fails its Cholesky
    factorization.
    """
    T = lin.A.shape[0]
    nx = lin.A.shape[1]
    nu = lin.B.shape[2]
    K = np.zeros((T, nu, nx))
    k = np.zeros((T, nu))
    Vx = cd.lx[T].copy()
    Vxx = cd.lxx[T].copy()
    dv1 = 0.0
    dv2 = 0.0
    reg_eye = reg * np.eye(nu)
    for t in range(T - 1, -1, -1):
        A, B = lin.A[t], lin.B[t]
        Qx = cd.lx[t] + A.T @ Vx
        Qu = cd.lu[t] + B.T @ Vx
        Qxx = cd.lxx[t] + A.T @ Vxx @ A
        Quu = cd.luu[t] + B.T @ Vxx @ B + reg_eye
        Qux = cd.lux[t] + B.T @ Vxx @ A
        try:
            chol = scipy.linalg.cho_factor(0.5 * (Quu + Quu.T), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise RegularizationNeeded(f"Quu not positive definite at knot {t}") from exc
        k[t] = -scipy.linalg.cho_solve(chol, Qu)
        K[t] = -scipy.linalg.cho_solve(chol, Qux)
        dv1 -= float(k[t] @ Qu)
        dv2 -= 0.5 * float(k[t] @ Quu @ k[t])
        Vx = Qx + K[t].T @ Quu @ k[t] + K[t].T @ Qu + Qux.T @ k[t]
        Vxx = Qxx + K[t].T @ Quu @ K[t] + K[t].T @ Qux + Qux.T @ K[t]
        Vxx = 0.5 * (Vxx + Vxx.T)
    return BackwardPassResult(K=K, k=k, dv1=dv1, dv2=dv2)


def forward_rollout(dyn: DiscreteDynamics, cost, ref: Trajectory,
                    K: FloatArray, k: FloatArray, alpha: float,
                    x0: FloatArray, t0: Optional[float] = None,
                    counter: EvalCounter | None = None
                    ) -> Optional[Trajectory]:
    """Roll the nonlinear dynamics under u = u_ref + K dx + alpha k.

    Returns None when the rollout fails (treated as infinite cost).
    """
    T = ref.horizon
    t0 = ref.t0 if t0 is None else t0
    states = np.zeros_like(ref.states)
    controls = np.zeros_like(ref.controls)
    states[0] = x0
    clamp = getattr(dyn, "clamp_control", None)
    try:
        for t in range(T):
            u = ref.controls[t] + K[t] @ (states[t] - ref.states[t]) \
                + alpha * k[t]
            if clamp is not None:
                u = clamp(u)
            controls[t] = u
            states[t + 1] = dyn.step(states[t], u)
            if counter is not None:
                counter.add(1)
    except DynamicsError:
        return None
    if not np.all(np.isfinite(states)):
        return None
    times = t0 + ref.dt * np.arange(T + 1)
    breakdown = cost.evaluate(states, controls, times)
    return Trajectory(states=states, controls=controls, dt=ref.dt, t0=t0,
                      total_cost=breakdown.total, per_term=breakdown.per_term)


def line_search(dyn: DiscreteDynamics, cost, ref: Trajectory,
                bp: BackwardPassResult, alphas: tuple[float, ...],
                counter: EvalCounter | None = None
                ) -> tuple[Trajectory, float, int]:
    """First improving alpha wins; on total failure return ref with alpha 0."""
    tried = 0
    for alpha in alphas:
        tried += 1
        cand = forward_rollout(dyn, cost, ref, bp.K, bp.k, alpha,
                               ref.states[0], counter=counter)
        if cand is not None and cand.total_cost < ref.total_cost:
            return cand, alpha, tried
    return ref, 0.0, tried


class LinearDiscreteModel:
    """x' = A x + B u; the minimal dynamics backend used by the LQ suites."""

    def __init__(self, A: FloatArray, B: FloatArray) -> None:
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.nx = self.A.shape[0]
        self.nu = self.B.shape[1]

    def step(self, x, u):
        return self.A @ x + self.B @ u

    def step_batch(self, X, U):
        return X @ self.A.T + U @ self.B.T


class Planner:
    """Warm-started MPC planner: one iLQR iteration per :meth:`plan_step`."""

    def __init__(self, dyn: DiscreteDynamics, cost, cfg: SolverConfig,
                 record_wall_times: bool = True) -> None:
        self.dyn = dyn
        self.cost = cost
        self.cfg = cfg
        self.reg = cfg.reg_init
        self.counter = EvalCounter()
        self.record_wall_times = record_wall_times
        self.warm: Optional[Trajectory] = None
        self.prev_policy: Optional[FeedbackPolicy] = None
        self._seq = 0

    # Warm-start management ----------------------------------------------------

    def reset(self) -> None:
        self.warm = None
        self.prev_policy = None
        self.reg = self.cfg.reg_init

    def set_cost(self, cost) -> None:
        """Swap the cost (runtime hot-swap path); warm start is kept."""
        self.cost = cost

    def _cold_start(self, x0: FloatArray, now: float) -> Trajectory:
        T = self.cfg.horizon
        neutral = getattr(self.dyn, "neutral_control", None)
        u0 = neutral(x0) if neutral is not None else np.zeros(self.dyn.nu)
        controls = np.tile(u0, (T, 1))
        ref = Trajectory(states=np.tile(x0, (T + 1, 1)), controls=controls,
                         dt=self.cfg.dt, t0=now, total_cost=np.inf)
        zero = FeedbackPolicy.zero(T, self.dyn.nx, self.dyn.nu, now)
        rolled = forward_rollout(self.dyn, self.cost, ref, zero.K, zero.k,
                                 0.0, x0, t0=now, counter=self.counter)
        if rolled is None:
            raise DynamicsError("cold-start rollout failed from initial state")
        return rolled

    def _shift_and_reroot(self, x0: FloatArray, now: float) -> Trajectory:
        """Drop elapsed knots, pad the tail, re-roll under old feedback."""
        warm = self.warm
        T = self.cfg.horizon
        n_drop = int(np.floor((now - warm.t0) / self.cfg.dt + 1e-9))
        n_drop = min(max(n_drop, 0), T)
        controls = np.vstack([
            warm.controls[n_drop:],
            np.tile(warm.controls[-1], (n_drop, 1)),
        ])
        ref_states = np.vstack([
            warm.states[n_drop:],
            np.tile(warm.states[-1], (n_drop, 1)),
        ])
        if self.prev_policy is not None:
            K = np.concatenate([
                self.prev_policy.K[n_drop:],
                np.tile(self.prev_policy.K[-1], (n_drop, 1, 1)),
            ])
        else:
            K = np.zeros((T, self.dyn.nu, self.dyn.nx))
        ref = Trajectory(states=ref_states, controls=controls,
                         dt=self.cfg.dt, t0=now, total_cost=np.inf)
        rolled = forward_rollout(self.dyn, self.cost, ref, K,
                                 np.zeros((T, self.dyn.nu)), 0.0, x0,
                                 t0=now, counter=self.counter)
        if rolled is None:
            # Old plan unusable from here (e.g. after a large disturbance).
            return self._cold_start(x0, now)
        return rolled

    # Linearization --------------------------------------------------------------

    def _linearize(self, ref: Trajectory, tm: dict, clock
                   ) -> tuple[LinearizedDynamics, CostDerivatives, int]:
        cfg = self.cfg
        T = ref.horizon
        times = ref.times()
        probe = self.cost.residual_running(ref.states[0], ref.controls[0],
                                           times[0])
        fd_before = self.counter.steps
        t_mark = clock() if clock else None
        A = np.zeros((T, self.dyn.nx, self.dyn.nx))
        B = np.zeros((T, self.dyn.nx, self.dyn.nu))
        mask = np.zeros(T, dtype=bool)
        knots = evaluation_knots(T, cfg.fd.skip_deriv)
        jacs: Optional[list] = [None] * T if probe is not None else None
        for t in knots:
            if probe is not None:
                res_fn = (lambda tt: lambda X, U:
                          self.cost.residual_running_batch(X, U, times[tt]))(t)
                A[t], B[t], jacs[t] = fd_jacobians(
                    self.dyn, ref.states[t], ref.controls[t], cfg.fd,
                    self.counter, residual_fn=res_fn)
            else:
                A[t], B[t] = fd_jacobians(self.dyn, ref.states[t],
                                          ref.controls[t], cfg.fd,
                                          self.counter)
            mask[t] = True
        for lo, hi in zip(knots[:-1], knots[1:]):
            for t in range(lo + 1, hi):
                w = (t - lo) / (hi - lo)
                A[t] = A[lo] + w * (A[hi] - A[lo])
                B[t] = B[lo] + w * (B[hi] - B[lo])
        lin = LinearizedDynamics(A=A, B=B, evaluated_mask=mask)
        fd_evals = self.counter.steps - fd_before
        if clock:
            tm["model"] = clock() - t_mark
            t_mark = clock()
        cd = self.cost.derivatives(ref.states, ref.controls, times,
                                   cfg.fd, jacs=jacs)
        if clock:
            tm["cost"] = clock() - t_mark
        return lin, cd, fd_evals

    # The MPC step ---------------------------------------------------------------

    def plan_step(self, x0: FloatArray, now: float,
                  costspec_version: int = 0) -> PlanSolution:
        """One warm-started iLQR iteration rooted at the current state.

        Internal failures degrade to returning the re-rooted warm solution
        with ``degraded=True``; this never raises in steady operation.
        """
        x0 = np.asarray(x0, dtype=float)
        clock = time.perf_counter if self.record_wall_times else None
        tm = dict.fromkeys(("model", "cost", "backward", "rollout"))

        t_start = clock() if clock else None
        rollout_before = self.counter.steps
        if self.warm is None:
            baseline = self._cold_start(x0, now)
        else:
            baseline = self._shift_and_reroot(x0, now)
        T = baseline.horizon
        degraded = False
        bp = None
        fd_evals = 0
        try:
            if clock:
                tm["rollout"] = clock() - t_start
            lin, cd, fd_evals = self._linearize(baseline, tm, clock)
            if clock:
                t_mark = clock()
            while True:
                try:
                    bp = backward_pass(lin, cd, self.reg)
                    break
                except RegularizationNeeded:
                    if self.reg >= self.cfg.reg_max:
                        bp = None
                        break
                    self.reg = min(self.reg * 2.0, self.cfg.reg_max)
            if clock:
                tm["backward"] = clock() - t_mark
                t_mark = clock()
            if bp is None:
                degraded = True
                accepted, alpha = baseline, 0.0
                bp = BackwardPassResult(
                    K=self.prev_policy.K.copy() if self.prev_policy is not None
                    else np.zeros((T, self.dyn.nu, self.dyn.nx)),
                    k=np.zeros((T, self.dyn.nu)), dv1=0.0, dv2=0.0)
            else:
                accepted, alpha, _ = line_search(
                    self.dyn, self.cost, baseline, bp, self.cfg.alphas,
                    self.counter)
                if alpha == 1.0:
                    self.reg = max(self.reg * 0.5, self.cfg.reg_min)
                elif alpha == 0.0:
                    self.reg = min(self.reg * 2.0, self.cfg.reg_max)
            if clock:
                tm["rollout"] += clock() - t_mark
        except DynamicsError:
            degraded = True
            accepted, alpha = baseline, 0.0
            bp = BackwardPassResult(
                K=np.zeros((T, self.dyn.nu, self.dyn.nx)),
                k=np.zeros((T, self.dyn.nu)), dv1=0.0, dv2=0.0)

        rollout_evals = self.counter.steps - rollout_before - fd_evals
        policy = FeedbackPolicy(K=bp.K, k=bp.k, alpha=alpha, timestamp=now)
        telemetry = SolveTelemetry(
            cost=accepted.total_cost, baseline_cost=baseline.total_cost,
            alpha=alpha, reg=self.reg,
            # report the full-step prediction when nothing was accepted
            expected_decrease=bp.expected_decrease(alpha if alpha > 0 else 1.0),
            fd_evals=fd_evals, rollout_evals=rollout_evals,
            degraded=degraded, costspec_version=costspec_version,
            time_model_derivs=tm["model"], time_cost_derivs=tm["cost"],
            time_backward=tm["backward"], time_rollout=tm["rollout"])
        self.warm = accepted
        self.prev_policy = policy
        self._seq += 1
        return PlanSolution(trajectory=accepted, policy=policy, timestamp=now,
                            solution_id=self._seq,
                            costspec_version=costspec_version,
                            telemetry=telemetry, degraded=degraded)

    # Offline mode -----------------------------------------------------------------

    def solve(self, x0: FloatArray, t0: float = 0.0,
              max_iters: int = 100, tol: float = 1.0e-9,
              ) -> tuple[Trajectory, FeedbackPolicy, list[SolveTelemetry]]:
        """Iterate to convergence from a fixed initial state (no shifting)."""
        x0 = np.asarray(x0, dtype=float)
        history: list[SolveTelemetry] = []
        self.reset()
        prev_cost = np.inf
        solution = None
        for _ in range(max_iters):
            solution = self.plan_step(x0, t0)
            history.append(solution.telemetry)
            if solution.telemetry.alpha == 0.0:
                # no improving step: converged if the backward pass predicts
                # nothing to gain, otherwise retry with more regularization
                if abs(solution.telemetry.expected_decrease) < tol \
                        or self.reg >= self.cfg.reg_max:
                    break
                continue
            if prev_cost - solution.trajectory.total_cost < tol:
                break
            prev_cost = solution.trajectory.total_cost
        return solution.trajectory, solution.policy, history
