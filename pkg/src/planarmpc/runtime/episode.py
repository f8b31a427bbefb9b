"""The asynchronous MPC executive, simulated-time flavor.

Three logical loops run against one clock: the plant at ``sim_rate``, the
estimator at ``measurement_rate``, the feedback controller at
``control_rate``, and the planner at ``planner_rate``. In simulated time the
loops are cooperatively scheduled in a fixed order on one thread, the
planner is granted a fixed simulated compute budget (its solution activates
one budget later), and the whole episode is bit-reproducible from the seed.

Commands reach the plant ``command_latency`` seconds after they are issued,
mirroring the message-passing delay of a real deployment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np

from ..cost import CompiledCost, CostSpec
from ..dynamics.model import FloatArray
from ..dynamics.simulate import DiscreteModel, apply_impulse, contact_forces
from ..errors import ConfigError, DynamicsError
from ..solver import PlanSolution, Planner
from .clocks import ClockConfig
from .estimator import VelocityFilterEstimator
from .log import EpisodeLog

if TYPE_CHECKING:  # avoid a circular import; tasks.py imports this package
    from ..tasks import Task


@dataclass(frozen=True)
class DisturbanceEvent:
    time: float
    body: int
    impulse: tuple[float, float]  # world-frame impulse, N*s

    def __post_init__(self) -> None:
        if self.time < 0.0:
            raise ConfigError("disturbance time must be >= 0")


@dataclass
class RunOptions:
    duration: Optional[float] = None
    seed: int = 0
    feedback_scale: float = 1.0     # 0 disables TV-LQR feedback (ablation)
    record_wall_times: bool = False
    initial_state: Optional[FloatArray] = None
    terminate_bound: float = 1.0e3
    # (time, fn(CostSpec) -> CostSpec) applied at the next plan step; each
    # application bumps the cost-spec version tag.
    cost_edits: Sequence[tuple[float, Callable[[CostSpec], CostSpec]]] = ()


def control_tick(solution: Optional[PlanSolution], x_est: FloatArray,
                 now: float, feedback_scale: float = 1.0
                 ) -> tuple[Optional[FloatArray], bool, int]:
    """Feedback-law evaluation at one control tick.

    Returns (command, stale, knot). A None command means hold the last one;
    ``stale`` is set when the solution has aged past its horizon.
    """
    if solution is None:
        return None, True, -1
    traj = solution.trajectory
    age = now - solution.timestamp
    horizon_duration = traj.horizon * traj.dt
    if age < 0 or age >= horizon_duration:
        return None, True, -1
    idx = min(int(age / traj.dt), traj.horizon - 1)
    u = traj.controls[idx] + feedback_scale * (
        solution.policy.K[idx] @ (x_est - traj.states[idx]))
    return u, False, idx


def run_episode(task: "Task", disturbances: Sequence[DisturbanceEvent] = (),
                options: Optional[RunOptions] = None) -> EpisodeLog:
    """Run one simulated-time episode; returns the full log."""
    opt = options or RunOptions()
    clocks = task.clocks
    duration = task.duration if opt.duration is None else opt.duration
    rng = np.random.default_rng(opt.seed)

    plant = DiscreteModel(task.model, 1.0 / clocks.sim_rate)
    cost_spec = task.cost
    cost_version = 0
    compiled = CompiledCost(cost_spec, task.model)
    planner_dyn = DiscreteModel(task.planner_model(), task.solver.dt)
    planner = Planner(planner_dyn, compiled, task.solver,
                      record_wall_times=opt.record_wall_times)
    estimator = VelocityFilterEstimator(task.model, task.estimator)

    log = EpisodeLog(task=task.name, seed=opt.seed, mode=clocks.mode)
    x = np.asarray(opt.initial_state, dtype=float).copy() \
        if opt.initial_state is not None else task.model.default_state()
    x_est = x.copy()
    u_held = task.model.home_control()
    active: Optional[PlanSolution] = None
    pending_activation: Optional[tuple[float, PlanSolution]] = None
    command_queue: deque[tuple[float, FloatArray]] = deque()
    edits = sorted(opt.cost_edits, key=lambda e: e[0])
    edit_idx = 0
    disturbances = sorted(disturbances, key=lambda d: d.time)
    dist_idx = 0

    sim_dt = 1.0 / clocks.sim_rate
    n_steps = int(round(duration * clocks.sim_rate))
    next_meas = 0.0
    next_ctrl = 0.0
    next_plan = 0.0
    meas_period = 1.0 / task.estimator.measurement_rate
    ctrl_period = 1.0 / clocks.control_rate
    plan_period = clocks.planner_period
    eps = 1e-9
    last_cmd = u_held.copy()

    for k in range(n_steps):
        t = k * sim_dt

        # 1. Measurement and estimate update.
        if t >= next_meas - eps:
            q_meas = estimator.measure(x, rng)
            x_est = estimator.update(q_meas, t)
            next_meas += meas_period

        # 2. Solution handover (after its simulated compute budget).
        if pending_activation is not None and t >= pending_activation[0] - eps:
            active = pending_activation[1]
            pending_activation = None

        # 3. Feedback control tick.
        if t >= next_ctrl - eps:
            u_cmd, stale, knot = control_tick(active, x_est, t,
                                              opt.feedback_scale)
            if u_cmd is None:
                u_cmd = last_cmd
            last_cmd = u_cmd
            command_queue.append((t + clocks.command_latency, u_cmd))
            stage, terms = compiled.stage_cost(x, u_cmd, t)
            forces = contact_forces(task.model, x) \
                if task.model.contact_points else np.zeros((0, 2))
            log.add({"type": "state", "t": t, "x": x, "x_est": x_est,
                     "u": u_cmd, "sol": active.solution_id if active else 0,
                     "stale": stale, "knot": knot, "cost": stage,
                     "terms": terms, "contact_forces": forces})
            next_ctrl += ctrl_period

        # 4. Plan step (applies pending cost edits first, then solves from
        #    the latest estimate; the result activates one budget later).
        if t >= next_plan - eps:
            while edit_idx < len(edits) and edits[edit_idx][0] <= t + eps:
                cost_spec = edits[edit_idx][1](cost_spec)
                cost_version += 1
                compiled = CompiledCost(cost_spec, task.model)
                planner.set_cost(compiled)
                edit_idx += 1
            solution = planner.plan_step(x_est, t, costspec_version=cost_version)
            pending_activation = (t + clocks.budget, solution)
            tele = solution.telemetry
            log.add({"type": "telemetry", "t": t, "sol": solution.solution_id,
                     "alpha": tele.alpha, "reg": tele.reg, "cost": tele.cost,
                     "baseline_cost": tele.baseline_cost,
                     "expected_decrease": tele.expected_decrease,
                     "fd_evals": tele.fd_evals,
                     "rollout_evals": tele.rollout_evals,
                     "degraded": tele.degraded,
                     "costspec_version": tele.costspec_version,
                     "phase_times": tele.phase_times()})
            next_plan += plan_period

        # 5. Disturbances arriving in this sim step.
        while dist_idx < len(disturbances) \
                and disturbances[dist_idx].time <= t + eps:
            d = disturbances[dist_idx]
            x = apply_impulse(task.model, x, d.body, d.impulse)
            log.add({"type": "disturbance", "t": t, "body": d.body,
                     "impulse": list(d.impulse)})
            dist_idx += 1

        # 6. Commands reach the plant after the message latency.
        while command_queue and command_queue[0][0] <= t + eps:
            _, u_held = command_queue.popleft()

        # 7. Plant step.
        try:
            x = plant.step(x, u_held)
        except DynamicsError as exc:
            log.add({"type": "event", "t": t, "kind": "terminated",
                     "reason": str(exc)})
            log.failed = True
            break
        if not np.all(np.abs(x) < opt.terminate_bound):
            log.add({"type": "event", "t": t, "kind": "terminated",
                     "reason": "state bound exceeded"})
            log.failed = True
            break

    log.summary["duration"] = duration
    log.summary["cost_version_final"] = cost_version
    log.finalize()
    return log


def run_episode_wallclock(task: "Task", duration: Optional[float] = None,
                          seed: int = 0, sample_rate: float = 50.0
                          ) -> EpisodeLog:
    """Run the threaded wall-clock runtime headlessly for one episode.

    Real solve times govern the schedule, so the log is not reproducible;
    state records are sampled snapshots rather than per-control-tick rows.
    """
    from .session import RuntimeSession

    duration = task.duration if duration is None else duration
    session = RuntimeSession(task, seed=seed)
    log = EpisodeLog(task=task.name, seed=seed, mode="wallclock")
    session.start()
    try:
        import time as _time
        period = 1.0 / sample_rate
        deadline = _time.monotonic() + duration
        while _time.monotonic() < deadline:
            snap = session.snapshot()
            frame = snap["frame"]
            log.add({"type": "state", "t": frame["t"], "x": frame["x"],
                     "x_est": frame["x_est"], "u": [], "sol": frame["sol"],
                     "stale": False, "knot": -1,
                     "cost": snap["cost"]["total"],
                     "terms": snap["cost"]["terms"],
                     "contact_forces": frame["contact_forces"]})
            for ev in session.pop_events():
                if ev["type"] == "telemetry":
                    ev = {**ev, "rollout_evals": ev.get("rollout_evals", 0),
                          "expected_decrease": ev.get("expected_decrease", 0.0)}
                log.add(ev)
            _time.sleep(period)
    finally:
        session.stop()
    log.summary["duration"] = duration
    log.finalize()
    return log
