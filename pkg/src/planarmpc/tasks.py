"""Task bundles: model + cost + solver + runtime configuration.

A task file is one YAML document naming a model and an ordered list of
residual terms with weights and parameters, plus solver and clock settings.
Task files round-trip losslessly through ``load_task`` / ``task_to_dict``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional

import numpy as np
import yaml

from .cost import CompiledCost, CostSpec, NormKind, ResidualTerm
from .derivs import FdConfig
from .dynamics.builtins import builtin_model
from .dynamics.model import ContactParams, ModelSpec, load_model
from .errors import ConfigError
from .runtime.clocks import ClockConfig
from .runtime.estimator import EstimatorConfig
from .solver import SolverConfig


@dataclass(frozen=True)
class Task:
    """Everything needed to run one benchmark task."""

    name: str
    model: ModelSpec
    cost: CostSpec
    solver: SolverConfig
    clocks: ClockConfig = field(default_factory=ClockConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    duration: float = 5.0
    planner_contact: Optional[ContactParams] = None  # planner-model override

    def planner_model(self) -> ModelSpec:
        if self.planner_contact is None:
            return self.model
        return replace(self.model, contact=self.planner_contact)

    def compiled_cost(self) -> CompiledCost:
        return CompiledCost(self.cost, self.model)

    def with_planner_slip(self, slip_stiffness: float) -> "Task":
        base = self.planner_contact or self.model.contact
        return replace(self, planner_contact=replace(
            base, slip_stiffness=slip_stiffness))


_BUILTIN_TASKS = ("pendulum_swingup", "cartpole_swingup", "hopper_hop",
                  "biped_stand", "biped_trot", "biped_walk")


def _term_from_dict(d: dict) -> ResidualTerm:
    d = dict(d)
    kind = d.pop("kind")
    weight = float(d.pop("weight"))
    norm = d.pop("norm", "quadratic")
    name = d.pop("name", "")
    smooth_c = float(d.pop("smooth_c", 0.01))
    params = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return ResidualTerm.make(kind, weight, norm=norm, name=name,
                             smooth_c=smooth_c, **params)


def _term_to_dict(t: ResidualTerm) -> dict:
    out = {"kind": t.kind, "weight": t.weight}
    if t.norm is not NormKind.QUADRATIC:
        out["norm"] = t.norm.value
        out["smooth_c"] = t.smooth_c
    if t.name:
        out["name"] = t.name
    for k, v in t.params:
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def task_from_dict(doc: dict, name_hint: str = "<task>") -> Task:
    doc = dict(doc)
    try:
        name = doc.pop("name")
        model_ref = doc.pop("model")
        if isinstance(model_ref, str) and not os.path.exists(model_ref):
            model = builtin_model(model_ref)
        else:
            model = load_model(model_ref)

        cost_doc = doc.pop("cost")
        cost = CostSpec(
            model=model.name,
            running=tuple(_term_from_dict(t) for t in cost_doc.get("running", [])),
            terminal=tuple(_term_from_dict(t) for t in cost_doc.get("terminal", [])))

        sd = dict(doc.pop("solver", {}))
        fd = FdConfig(**sd.pop("fd", {}))
        if "alphas" in sd:
            sd["alphas"] = tuple(float(a) for a in sd["alphas"])
        solver = SolverConfig(fd=fd, **sd)

        clocks = ClockConfig(**doc.pop("clocks", {}))
        estimator = EstimatorConfig(**doc.pop("estimator", {}))
        duration = float(doc.pop("duration", 5.0))
        pc = doc.pop("planner_contact", None)
        planner_contact = ContactParams(**{k: float(v) for k, v in pc.items()}) \
            if pc else None
        if doc:
            raise ConfigError(f"task has unknown fields {sorted(doc)}")
        return Task(name=name, model=model, cost=cost, solver=solver,
                    clocks=clocks, estimator=estimator, duration=duration,
                    planner_contact=planner_contact)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name_hint}: invalid task document: {exc}") from exc


def task_to_dict(task: Task) -> dict:
    """Inverse of task_from_dict for builtin-model tasks (lossless)."""
    out = {
        "name": task.name,
        "model": task.model.name,
        "cost": {
            "running": [_term_to_dict(t) for t in task.cost.running],
            "terminal": [_term_to_dict(t) for t in task.cost.terminal],
        },
        "solver": {
            "horizon": task.solver.horizon,
            "dt": task.solver.dt,
            "alphas": list(task.solver.alphas),
            "reg_init": task.solver.reg_init,
            "reg_min": task.solver.reg_min,
            "reg_max": task.solver.reg_max,
            "fd": {"epsilon": task.solver.fd.epsilon,
                   "scheme": task.solver.fd.scheme,
                   "skip_deriv": task.solver.fd.skip_deriv},
        },
        "clocks": {
            "planner_rate": task.clocks.planner_rate,
            "control_rate": task.clocks.control_rate,
            "sim_rate": task.clocks.sim_rate,
            "command_latency": task.clocks.command_latency,
            "mode": task.clocks.mode,
        },
        "estimator": {
            "position_noise_std": task.estimator.position_noise_std,
            "angle_noise_std": task.estimator.angle_noise_std,
            "measurement_rate": task.estimator.measurement_rate,
            "lowpass_cutoff": task.estimator.lowpass_cutoff,
        },
        "duration": task.duration,
    }
    if task.clocks.planner_budget is not None:
        out["clocks"]["planner_budget"] = task.clocks.planner_budget
    if task.planner_contact is not None:
        c = task.planner_contact
        out["planner_contact"] = {
            "normal_stiffness": c.normal_stiffness,
            "normal_damping": c.normal_damping,
            "friction_coeff": c.friction_coeff,
            "slip_stiffness": c.slip_stiffness,
            "smoothing_width": c.smoothing_width,
        }
    return out


def load_task(path_or_name: str) -> Task:
    """Load a task file, or a bundled task by name."""
    if os.path.exists(path_or_name):
        with open(path_or_name, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        return task_from_dict(doc, name_hint=path_or_name)
    if path_or_name in _BUILTIN_TASKS:
        ref = resources.files("planarmpc.data.tasks") / f"{path_or_name}.yaml"
        doc = yaml.safe_load(ref.read_text(encoding="utf-8"))
        return task_from_dict(doc, name_hint=f"{path_or_name}.yaml")
    raise ConfigError(
        f"unknown task '{path_or_name}'; bundled tasks: {', '.join(_BUILTIN_TASKS)}")


def builtin_tasks() -> list[str]:
    return list(_BUILTIN_TASKS)
