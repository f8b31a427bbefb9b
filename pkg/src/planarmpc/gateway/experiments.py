"""Headless experiments: each runs episodes, writes the logs plus a summary
document and a small comparison table, and is deterministic under a fixed
seed (wall-clock timing statistics land in separate timing artifacts).
"""

from __future__ import annotations

import json
import os
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConfigError
from ..runtime import DisturbanceEvent, RunOptions, run_episode
from ..runtime.log import EpisodeLog
from ..tasks import Task, load_task

EXPERIMENTS = ("swingup", "walk_to_target", "feedback_ablation",
               "slip_sweep", "skip_sweep", "fd_scheme_compare")


def _write(outdir: str, name: str, logs: dict[str, EpisodeLog],
           summary: dict, table: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    for key, log in logs.items():
        log.write(os.path.join(outdir, f"{key}.ndjson"))
        timing = log.timing_report()
        if timing:
            with open(os.path.join(outdir, f"{key}.timing.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(timing, fh, indent=2)
    with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    with open(os.path.join(outdir, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    summary["outdir"] = outdir
    return summary


def _goal_angle_trace(log: EpisodeLog, model_name: str) -> np.ndarray:
    idx = {"pendulum": 0, "cartpole": 1}[model_name]
    return np.array([r["x"][idx] for r in log.states()])


def swingup(outdir: str, task: Optional[Task] = None, seed: int = 0,
            duration: Optional[float] = None) -> dict:
    """Pendulum and cartpole swing-up through the full MPC runtime."""
    tasks = [task] if task is not None else [load_task("pendulum_swingup"),
                                             load_task("cartpole_swingup")]
    logs, rows, summary = {}, [], {"experiment": "swingup", "seed": seed}
    for tk in tasks:
        log = run_episode(tk, options=RunOptions(duration=duration, seed=seed))
        theta = _goal_angle_trace(log, tk.model.name)
        within = np.abs(theta - np.pi) < 0.05
        hit = int(np.argmax(within)) if within.any() else None
        ticks_per_s = tk.clocks.control_rate
        t_goal = hit / ticks_per_s if hit is not None else None
        logs[tk.name] = log
        summary[tk.name] = {
            "reached_goal": bool(within.any()),
            "time_to_goal_s": t_goal,
            "plan_steps_to_goal": (int(np.ceil(t_goal * tk.clocks.planner_rate))
                                   if t_goal is not None else None),
            "final_angle": float(theta[-1]),
            "failed": log.failed,
        }
        rows.append(f"{tk.name:24s} goal={'yes' if within.any() else 'NO':3s} "
                    f"t={t_goal if t_goal is not None else float('nan'):.2f}s")
    return _write(outdir, "swingup", logs, summary,
                  "\n".join(rows) + "\n")


def walk_to_target(outdir: str, task: Optional[Task] = None, seed: int = 0,
                   duration: Optional[float] = None) -> dict:
    tk = task or load_task("biped_walk")
    log = run_episode(tk, options=RunOptions(duration=duration, seed=seed))
    goal = next(dict(t.params)["goal"] for t in tk.cost.running
                if t.kind == "position")
    head = tk.model.markers["head"]
    from ..dynamics.kinematics import forward_chain
    xs = np.array(log.states()[-1]["x"])
    ch = forward_chain(tk.model, xs[None, :tk.model.nq], xs[None, tk.model.nq:])
    head_pos = ch.point_position(head.body, head.offset)[0]
    err = float(abs(head_pos[0] - goal[0]))
    summary = {"experiment": "walk_to_target", "seed": seed,
               "goal_x": float(goal[0]), "final_head_x": float(head_pos[0]),
               "abs_error_x": err, "failed": log.failed,
               "mean_cost": log.summary["mean_cost"]}
    table = f"walk_to_target: goal_x={goal[0]:.2f} final_x={head_pos[0]:.3f} " \
            f"err={err:.3f} failed={log.failed}\n"
    return _write(outdir, "walk_to_target", {"walk": log}, summary, table)


def _ablation_task(base: Task) -> Task:
    """Trot with pose noise; the planner is frozen over 50 ms windows."""
    return replace(
        base,
        clocks=replace(base.clocks, planner_rate=20.0),
        estimator=replace(base.estimator, position_noise_std=0.001,
                          angle_noise_std=0.002, measurement_rate=200.0,
                          lowpass_cutoff=10.0))


def feedback_ablation(outdir: str, task: Optional[Task] = None, seed: int = 7,
                      duration: Optional[float] = None) -> dict:
    """TV-LQR feedback versus open-loop replay on the noisy trot task."""
    tk = _ablation_task(task or load_task("biped_trot"))
    duration = duration or 5.0
    logs = {}
    for label, fb in (("feedback", 1.0), ("openloop", 0.0)):
        log = run_episode(tk, options=RunOptions(
            duration=duration, seed=seed, feedback_scale=fb))
        logs[label] = log
    n = min(len(logs["feedback"].states()), len(logs["openloop"].states()))
    mean_fb = float(np.mean([r["cost"] for r in logs["feedback"].states()[:n]]))
    mean_ol = float(np.mean([r["cost"] for r in logs["openloop"].states()[:n]]))
    improvement = 1.0 - mean_fb / mean_ol if mean_ol > 0 else 0.0
    summary = {"experiment": "feedback_ablation", "seed": seed,
               "matched_ticks": n,
               "mean_cost_feedback": mean_fb, "mean_cost_openloop": mean_ol,
               "improvement": improvement,
               "feedback_failed": logs["feedback"].failed,
               "openloop_failed": logs["openloop"].failed}
    table = (f"feedback mean cost : {mean_fb:12.4f}\n"
             f"openloop mean cost : {mean_ol:12.4f}\n"
             f"improvement        : {improvement * 100:10.1f}%\n")
    return _write(outdir, "feedback_ablation", logs, summary, table)


def _slip_task(base: Task) -> tuple[Task, list[DisturbanceEvent]]:
    task = replace(base, clocks=replace(base.clocks, planner_rate=25.0))
    shoves = [DisturbanceEvent(time=1.0, body=0, impulse=(2.0, 0.0)),
              DisturbanceEvent(time=2.5, body=0, impulse=(-2.0, 0.0))]
    return task, shoves


def slip_sweep(outdir: str, task: Optional[Task] = None, seed: int = 0,
               duration: Optional[float] = None,
               settings: Sequence[float] = (1.0, 100.0)) -> dict:
    """Planner-model slip regularization: control smoothness vs compute."""
    base, shoves = _slip_task(task or load_task("biped_stand"))
    duration = duration or 4.0
    logs, rows = {}, []
    summary: dict = {"experiment": "slip_sweep", "seed": seed, "settings": {}}
    for slip in settings:
        tk = base.with_planner_slip(slip)
        log = run_episode(tk, disturbances=shoves, options=RunOptions(
            duration=duration, seed=seed, record_wall_times=True))
        md = [r["phase_times"]["model_derivs"] for r in log.telemetry()
              if r.get("phase_times")
              and r["phase_times"].get("model_derivs") is not None]
        entry = {"mean_abs_du": log.summary["mean_abs_du"],
                 "mean_cost": log.summary["mean_cost"],
                 "model_deriv_time_mean": float(np.mean(md)) if md else None,
                 "failed": log.failed}
        summary["settings"][f"{slip:g}"] = entry
        logs[f"slip_{slip:g}"] = log
        rows.append(f"slip={slip:7.1f}  |du|={entry['mean_abs_du']:.6f}  "
                    f"model-derivs={entry['model_deriv_time_mean'] * 1e3:7.1f} ms  "
                    f"cost={entry['mean_cost']:.4f}")
    return _write(outdir, "slip_sweep", logs, summary, "\n".join(rows) + "\n")


def skip_sweep(outdir: str, task: Optional[Task] = None, seed: int = 0,
               duration: Optional[float] = None,
               skips: Sequence[int] = (0, 1, 3)) -> dict:
    """Derivative skipping: FD evaluation counts versus episode cost."""
    base = task or load_task("biped_stand")
    base = replace(base, clocks=replace(base.clocks, planner_rate=25.0))
    duration = duration or 4.0
    logs, rows = {}, []
    summary: dict = {"experiment": "skip_sweep", "seed": seed, "settings": {}}
    for s in skips:
        tk = replace(base, solver=replace(
            base.solver, fd=replace(base.solver.fd, skip_deriv=int(s))))
        log = run_episode(tk, options=RunOptions(duration=duration, seed=seed))
        entry = {"fd_evals": log.summary["fd_evals"],
                 "mean_cost": log.summary["mean_cost"],
                 "final_cost": log.summary["final_cost"],
                 "failed": log.failed}
        summary["settings"][f"{s:d}"] = entry
        logs[f"skip_{s}"] = log
        rows.append(f"skip={s}  fd_evals={entry['fd_evals']:8d}  "
                    f"mean cost={entry['mean_cost']:.4f}")
    return _write(outdir, "skip_sweep", logs, summary, "\n".join(rows) + "\n")


def fd_scheme_compare(outdir: str, task: Optional[Task] = None, seed: int = 0,
                      duration: Optional[float] = None) -> dict:
    """Forward versus centered differences on a locomotion task.

    Outcomes are recorded, not asserted: this reproduces the observation
    that centered differencing can misbehave through contact.
    """
    base = task or load_task("biped_trot")
    duration = duration or 3.0
    logs, rows = {}, []
    summary: dict = {"experiment": "fd_scheme_compare", "seed": seed,
                     "schemes": {}}
    for scheme in ("forward", "centered"):
        tk = replace(base, solver=replace(
            base.solver, fd=replace(base.solver.fd, scheme=scheme)))
        log = run_episode(tk, options=RunOptions(duration=duration, seed=seed))
        entry = {"mean_cost": log.summary["mean_cost"],
                 "fd_evals": log.summary["fd_evals"],
                 "degraded_steps": log.summary["degraded_steps"],
                 "failed": log.failed}
        summary["schemes"][scheme] = entry
        logs[scheme] = log
        rows.append(f"{scheme:9s} cost={entry['mean_cost']:10.4f} "
                    f"fd_evals={entry['fd_evals']:8d} failed={entry['failed']}")
    return _write(outdir, "fd_scheme_compare", logs, summary,
                  "\n".join(rows) + "\n")


def run_experiment(name: str, outdir: str, task_file: Optional[str] = None,
                   seed: int = 0, duration: Optional[float] = None) -> dict:
    if name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment '{name}'; available: {', '.join(EXPERIMENTS)}")
    task = load_task(task_file) if task_file else None
    fn: Callable = {
        "swingup": swingup,
        "walk_to_target": walk_to_target,
        "feedback_ablation": feedback_ablation,
        "slip_sweep": slip_sweep,
        "skip_sweep": skip_sweep,
        "fd_scheme_compare": fd_scheme_compare,
    }[name]
    kwargs = {"seed": seed, "duration": duration}
    if task is not None:
        kwargs["task"] = task
    return fn(os.path.join(outdir, name), **kwargs)
