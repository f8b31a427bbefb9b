import json

import pytest
from hypothesis import given, settings, strategies as st

from planarmpc.errors import ProtocolError
from planarmpc.gateway import protocol


# --- strategies for valid messages ---------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False,
                   min_value=-1e6, max_value=1e6)
ids = st.integers(min_value=0, max_value=2 ** 31)
names = st.text(st.characters(whitelist_categories=("L", "N")), min_size=1,
                max_size=16)


def command_strategy():
    return st.one_of(
        st.fixed_dictionaries({"type": st.just("set_target"), "id": ids,
                               "x": finite, "z": finite}),
        st.fixed_dictionaries({"type": st.just("set_weight"), "id": ids,
                               "term": names,
                               "value": st.floats(0, 1e6, allow_nan=False)}),
        st.fixed_dictionaries({"type": st.just("set_param"), "id": ids,
                               "path": st.just("skip_deriv"),
                               "value": st.integers(0, 50)}),
        st.fixed_dictionaries({"type": st.just("set_param"), "id": ids,
                               "path": st.just("slip_stiffness"),
                               "value": st.floats(1.0, 1e4, allow_nan=False)}),
        st.fixed_dictionaries({"type": st.just("push"), "id": ids,
                               "impulse": st.tuples(finite, finite).map(list),
                               "body": st.integers(0, 10)}),
        st.fixed_dictionaries({"type": st.sampled_from(["pause", "resume",
                                                        "reset"]),
                               "id": ids}),
        st.fixed_dictionaries({"type": st.just("start_task"), "id": ids,
                               "task": names}),
    )


def update_strategy():
    terms = st.dictionaries(names, finite, max_size=4)
    return st.one_of(
        st.fixed_dictionaries({"type": st.just("hello"),
                               "version": st.just(protocol.SCHEMA_VERSION),
                               "role": st.sampled_from(["operator", "readonly"]),
                               "tasks": st.lists(names, max_size=4)}),
        st.fixed_dictionaries({"type": st.just("ack"), "id": ids}),
        st.fixed_dictionaries({"type": st.just("nack"), "id": ids,
                               "reason": st.text(max_size=64)}),
        st.fixed_dictionaries({"type": st.just("state_frame"), "t": finite,
                               "x": st.lists(finite, min_size=1, max_size=14)}),
        st.fixed_dictionaries({"type": st.just("cost_frame"), "t": finite,
                               "total": finite, "terms": terms}),
        st.fixed_dictionaries({"type": st.just("telemetry"), "t": finite,
                               "alpha": finite,
                               "fd_evals": st.integers(0, 10 ** 6)}),
        st.fixed_dictionaries({"type": st.just("task_catalog"),
                               "tasks": st.lists(names, max_size=6),
                               "weights": terms}),
    )


@settings(max_examples=500, deadline=None)
@given(command_strategy())
def test_command_roundtrip(msg):
    wire = protocol.encode(msg)
    back = protocol.decode_command(wire)
    assert back == msg
    assert protocol.encode(back) == wire


@settings(max_examples=500, deadline=None)
@given(update_strategy())
def test_update_roundtrip(msg):
    wire = protocol.encode(msg)
    back = protocol.decode_update(wire)
    assert back == msg
    assert protocol.encode(back) == wire


# --- validation ------------------------------------------------------------------

def test_reject_malformed_json():
    with pytest.raises(ProtocolError, match="invalid JSON"):
        protocol.decode("{nope")


def test_reject_unknown_type():
    with pytest.raises(ProtocolError, match="unknown command"):
        protocol.decode_command(json.dumps({"type": "warp", "id": 1}))


def test_reject_missing_fields():
    with pytest.raises(ProtocolError, match="missing field"):
        protocol.decode_command(json.dumps({"type": "set_target", "id": 1,
                                            "x": 0.0}))


def test_reject_bad_param_path():
    with pytest.raises(ProtocolError, match="unknown parameter"):
        protocol.validate_command({"type": "set_param", "id": 1,
                                   "path": "warp_factor", "value": 9})


def test_reject_out_of_range_param():
    with pytest.raises(ProtocolError, match="lie in"):
        protocol.validate_command({"type": "set_param", "id": 1,
                                   "path": "slip_stiffness", "value": 0.1})


def test_reject_nonfinite():
    with pytest.raises(ProtocolError):
        protocol.validate_command({"type": "set_target", "id": 1,
                                   "x": float("nan"), "z": 0.0})


def test_reject_negative_weight():
    with pytest.raises(ProtocolError, match=">= 0"):
        protocol.validate_command({"type": "set_weight", "id": 1,
                                   "term": "gait", "value": -2.0})


def test_reject_newer_schema():
    with pytest.raises(ProtocolError, match="schema"):
        protocol.validate_update({"type": "hello", "version": 99,
                                  "role": "operator"})
