"""Wall-clock interactive session: a realtime thread runs the plant,
estimator, and feedback controller; a planner thread replans asynchronously.

The two threads exchange data only through single-writer mailboxes (latest
estimate, latest solution) and an append-only event queue. Interactive edits
are serialized through the planner thread at solve boundaries, so a command
can never interleave with a backward pass; each applied edit bumps the
cost-spec version that subsequent telemetry carries.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import replace
from typing import Callable, Optional

import numpy as np

from ..cost import CompiledCost
from ..dynamics.kinematics import body_segments
from ..dynamics.simulate import DiscreteModel, apply_impulse, contact_forces
from ..errors import ConfigError, DynamicsError
from ..solver import Planner
from ..tasks import Task
from .episode import control_tick
from .estimator import VelocityFilterEstimator


class RuntimeSession:
    """Owns the runtime for one task in wall-clock mode."""

    def __init__(self, task: Task, seed: int = 0) -> None:
        self.task = task
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._plant = DiscreteModel(task.model, 1.0 / task.clocks.sim_rate)
        self._estimator = VelocityFilterEstimator(task.model, task.estimator)
        self._cost_spec = task.cost
        self._cost_version = 0
        self._compiled = CompiledCost(task.cost, task.model)
        self._planner_contact = task.planner_contact
        self._solver_cfg = task.solver
        self._planner = Planner(
            DiscreteModel(task.planner_model(), task.solver.dt),
            self._compiled, task.solver, record_wall_times=True)
        self._planner_period = task.clocks.planner_period

        self._lock = threading.Lock()
        self._x = task.model.default_state()
        self._x_est = self._x.copy()
        self._t = 0.0
        self._u_held = task.model.home_control()
        self._last_cmd = self._u_held.copy()
        self._active_solution = None
        self._paused = False
        self._running = False
        self._push_queue: deque = deque()
        self._command_queue: deque = deque()  # (fn, Event, result-slot)
        self._events: deque = deque(maxlen=4096)
        self._cmd_latency: deque = deque()
        self._threads: list[threading.Thread] = []

    # Lifecycle ------------------------------------------------------------------

    def start(self) -> None:
        self._running = True
        rt = threading.Thread(target=self._realtime_loop, daemon=True,
                              name="planarmpc-rt")
        pl = threading.Thread(target=self._planner_loop, daemon=True,
                              name="planarmpc-planner")
        self._threads = [rt, pl]
        rt.start()
        pl.start()

    def stop(self) -> None:
        self._running = False
        for th in self._threads:
            th.join(timeout=2.0)

    # Loops ----------------------------------------------------------------------

    def _realtime_loop(self) -> None:
        clocks = self.task.clocks
        sim_dt = 1.0 / clocks.sim_rate
        meas_period = 1.0 / self.task.estimator.measurement_rate
        ctrl_period = 1.0 / clocks.control_rate
        next_meas = next_ctrl = 0.0
        start = time.monotonic()
        behind = 0.0
        while self._running:
            with self._lock:
                if not self._paused:
                    t = self._t
                    if t >= next_meas - 1e-9:
                        q = self._estimator.measure(self._x, self._rng)
                        self._x_est = self._estimator.update(q, t)
                        next_meas += meas_period
                    if t >= next_ctrl - 1e-9:
                        u, stale, _ = control_tick(self._active_solution,
                                                   self._x_est, t)
                        if u is None:
                            u = self._last_cmd
                        self._last_cmd = u
                        self._cmd_latency.append(
                            (t + clocks.command_latency, u))
                        next_ctrl += ctrl_period
                    while self._push_queue:
                        body, impulse = self._push_queue.popleft()
                        self._x = apply_impulse(self.task.model, self._x,
                                                body, impulse)
                    while self._cmd_latency and self._cmd_latency[0][0] <= t + 1e-9:
                        _, self._u_held = self._cmd_latency.popleft()
                    try:
                        self._x = self._plant.step(self._x, self._u_held)
                    except DynamicsError:
                        self._events.append(
                            {"type": "event", "t": t, "kind": "diverged"})
                        self._x = self.task.model.default_state()
                        self._estimator.reset()
                    self._t = t + sim_dt
            # Pace to the wall clock; never sleep if behind.
            target = start + self._t
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(min(delay, sim_dt))

    def _planner_loop(self) -> None:
        while self._running:
            t_solve_start = time.monotonic()
            # Apply queued edits at the solve boundary.
            while self._command_queue:
                fn, done, slot = self._command_queue.popleft()
                try:
                    slot["applied"] = fn() or {}
                    slot["ok"] = True
                except (ConfigError, ValueError) as exc:
                    slot["ok"] = False
                    slot["reason"] = str(exc)
                done.set()
            with self._lock:
                paused = self._paused
                x_est = self._x_est.copy()
                t = self._t
            if paused:
                time.sleep(0.02)
                continue
            try:
                solution = self._planner.plan_step(
                    x_est, t, costspec_version=self._cost_version)
            except DynamicsError:
                time.sleep(self._planner_period)
                continue
            with self._lock:
                self._active_solution = solution
            tele = solution.telemetry
            self._events.append({
                "type": "telemetry", "t": t, "sol": solution.solution_id,
                "alpha": tele.alpha, "reg": tele.reg, "cost": tele.cost,
                "baseline_cost": tele.baseline_cost,
                "fd_evals": tele.fd_evals, "degraded": tele.degraded,
                "costspec_version": tele.costspec_version,
                "phase_times": tele.phase_times()})
            elapsed = time.monotonic() - t_solve_start
            if elapsed < self._planner_period:
                time.sleep(self._planner_period - elapsed)

    # Streaming ------------------------------------------------------------------

    def snapshot(self) -> dict:
        """State frame for the UI stream."""
        with self._lock:
            x = self._x.copy()
            x_est = self._x_est.copy()
            t = self._t
            sol = self._active_solution
            u = self._last_cmd.copy()
        model = self.task.model
        segs = body_segments(model, x[None, :model.nq])[0]
        forces = contact_forces(model, x) if model.contact_points \
            else np.zeros((0, 2))
        feet = []
        if model.contact_points:
            from ..dynamics.kinematics import forward_chain
            ch = forward_chain(model, x[None, :model.nq], x[None, model.nq:])
            feet = [ch.point_position(cp.body, cp.offset)[0].tolist()
                    for cp in model.contact_points]
        stage, terms = self._compiled.stage_cost(x, u, t)
        frame = {
            "type": "state_frame", "t": t,
            "x": x.tolist(), "x_est": x_est.tolist(),
            "segments": segs.tolist(),
            "contact_points": feet,
            "contact_forces": forces.tolist(),
            "paused": self._paused,
            "goal": self._current_goal(),
            "plan_trace": [], "sol": sol.solution_id if sol else 0,
        }
        if sol is not None and model.floating_base:
            frame["plan_trace"] = sol.trajectory.states[:, :2].tolist()
        cost_frame = {"type": "cost_frame", "t": t, "total": stage,
                      "terms": terms}
        return {"frame": frame, "cost": cost_frame}

    def _current_goal(self):
        for term in self._cost_spec.running:
            if term.kind == "position":
                return list(term.param_dict["goal"])
        return None

    def pop_events(self) -> list[dict]:
        out = []
        while self._events:
            out.append(self._events.popleft())
        return out

    # Commands -------------------------------------------------------------------

    def _through_planner(self, fn: Callable[[], Optional[dict]],
                         timeout: float = 3.0) -> tuple[bool, dict | str]:
        done = threading.Event()
        slot: dict = {}
        self._command_queue.append((fn, done, slot))
        if not done.wait(timeout):
            return False, "planner did not apply the command in time"
        if slot.get("ok"):
            return True, slot.get("applied", {})
        return False, slot.get("reason", "rejected")

    def _swap_cost(self, new_spec) -> dict:
        compiled = CompiledCost(new_spec, self.task.model)  # validates
        self._cost_spec = new_spec
        self._compiled = compiled
        self._cost_version += 1
        self._planner.set_cost(compiled)
        return {"costspec_version": self._cost_version}

    def apply_command(self, cmd: dict) -> tuple[bool, dict | str]:
        """Apply one validated command; returns (ok, applied|reason)."""
        ctype = cmd["type"]
        if ctype == "pause":
            with self._lock:
                self._paused = True
            return True, {}
        if ctype == "resume":
            with self._lock:
                self._paused = False
            return True, {}
        if ctype == "reset":
            def do_reset():
                with self._lock:
                    self._x = self.task.model.default_state()
                    self._x_est = self._x.copy()
                    self._u_held = self.task.model.home_control()
                    self._last_cmd = self._u_held.copy()
                    self._active_solution = None
                    self._cmd_latency.clear()
                self._estimator.reset()
                self._planner.reset()
                return {}
            return self._through_planner(do_reset)
        if ctype == "push":
            body = cmd.get("body", 0)
            if not 0 <= body < self.task.model.n_bodies:
                return False, f"body index {body} out of range"
            self._push_queue.append((body, tuple(cmd["impulse"])))
            return True, {}
        if ctype == "set_target":
            def do_target():
                if self._current_goal() is None:
                    raise ConfigError("task has no position target")
                return self._swap_cost(self._cost_spec.with_param(
                    "position", goal=(float(cmd["x"]), float(cmd["z"]))))
            return self._through_planner(do_target)
        if ctype == "set_weight":
            def do_weight():
                return self._swap_cost(self._cost_spec.with_weight(
                    cmd["term"], float(cmd["value"])))
            return self._through_planner(do_weight)
        if ctype == "set_param":
            return self._through_planner(lambda: self._set_param(
                cmd["path"], cmd["value"]))
        return False, f"unsupported command '{ctype}'"

    def _set_param(self, path: str, value) -> dict:
        if path == "skip_deriv":
            self._solver_cfg = replace(
                self._solver_cfg,
                fd=replace(self._solver_cfg.fd, skip_deriv=int(value)))
            self._planner.cfg = self._solver_cfg
        elif path == "fd_epsilon":
            self._solver_cfg = replace(
                self._solver_cfg,
                fd=replace(self._solver_cfg.fd, epsilon=float(value)))
            self._planner.cfg = self._solver_cfg
        elif path == "horizon_T":
            self._solver_cfg = replace(self._solver_cfg, horizon=int(value))
            self._planner.cfg = self._solver_cfg
            self._planner.reset()  # warm start shape changed
        elif path == "slip_stiffness":
            base = self._planner_contact or self.task.model.contact
            self._planner_contact = replace(base, slip_stiffness=float(value))
            model = replace(self.task.model, contact=self._planner_contact)
            self._planner.dyn = DiscreteModel(model, self._solver_cfg.dt)
        elif path == "gait_period":
            return self._swap_cost(self._cost_spec.with_param(
                "gait", period=float(value)))
        elif path == "planner_rate":
            self._planner_period = 1.0 / float(value)
        else:
            raise ConfigError(f"unknown parameter path '{path}'")
        return {"path": path, "value": value}

    def params_snapshot(self) -> dict:
        weights = {t.label: t.weight
                   for t in self._cost_spec.running + self._cost_spec.terminal}
        return {
            "type": "task_catalog",
            "tasks": [self.task.name],
            "params": {
                "skip_deriv": self._solver_cfg.fd.skip_deriv,
                "fd_epsilon": self._solver_cfg.fd.epsilon,
                "horizon_T": self._solver_cfg.horizon,
                "slip_stiffness": (self._planner_contact
                                   or self.task.model.contact).slip_stiffness,
                "planner_rate": 1.0 / self._planner_period,
            },
            "weights": weights,
            "costspec_version": self._cost_version,
        }
