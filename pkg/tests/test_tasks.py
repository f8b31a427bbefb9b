import pytest
import yaml

from planarmpc.cost import CompiledCost
from planarmpc.errors import ConfigError
from planarmpc.tasks import (
    builtin_tasks, load_task, task_from_dict, task_to_dict,
)


def test_all_builtin_tasks_compile():
    for name in builtin_tasks():
        task = load_task(name)
        CompiledCost(task.cost, task.model)  # validates every term
        assert task.solver.horizon >= 1
        assert task.duration > 0


def test_task_roundtrips_losslessly():
    for name in builtin_tasks():
        task = load_task(name)
        doc = task_to_dict(task)
        again = task_from_dict(doc)
        assert task_to_dict(again) == doc
        assert again.cost == task.cost
        assert again.solver == task.solver
        assert again.clocks == task.clocks
        assert again.estimator == task.estimator


def test_task_roundtrip_through_yaml_text(tmp_path):
    task = load_task("biped_trot")
    p = tmp_path / "trot.yaml"
    p.write_text(yaml.safe_dump(task_to_dict(task)))
    again = load_task(str(p))
    assert task_to_dict(again) == task_to_dict(task)


def test_unknown_task_rejected():
    with pytest.raises(ConfigError, match="unknown task"):
        load_task("backflip")


def test_unknown_field_rejected():
    doc = task_to_dict(load_task("biped_stand"))
    doc["frobnicate"] = True
    with pytest.raises(ConfigError, match="frobnicate"):
        task_from_dict(doc)


def test_bad_residual_kind_rejected():
    doc = task_to_dict(load_task("biped_stand"))
    doc["cost"]["running"][0]["kind"] = "wobble"
    task = task_from_dict(doc)  # kinds check at compile
    with pytest.raises(ConfigError, match="unknown residual kind"):
        CompiledCost(task.cost, task.model)


def test_planner_slip_override():
    task = load_task("biped_stand").with_planner_slip(100.0)
    assert task.planner_model().contact.slip_stiffness == 100.0
    assert task.model.contact.slip_stiffness != 100.0  # plant untouched
    doc = task_to_dict(task)
    assert doc["planner_contact"]["slip_stiffness"] == 100.0
    assert task_from_dict(doc).planner_contact.slip_stiffness == 100.0
