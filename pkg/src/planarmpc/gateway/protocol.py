"""Session wire protocol: JSON text messages over a websocket transport.

Messages are flat JSON objects with a ``type`` field. Commands carry a
client-chosen ``id`` echoed back in the matching ack/nack. The handshake
(``hello``) carries the schema version; peers must reject higher versions.

Every message round-trips exactly through :func:`encode` / :func:`decode`
(canonical JSON with repr-exact floats), which the protocol fuzz tests pin.
"""

from __future__ import annotations

import json
import math
from typing import Any

from ..errors import ProtocolError

SCHEMA_VERSION = 1

# set_param paths the runtime exposes, with validation bounds.
PARAM_PATHS = {
    "skip_deriv": (0, 50, int),
    "fd_epsilon": (1e-12, 1e-2, float),
    "horizon_T": (1, 1000, int),
    "slip_stiffness": (1.0, 1e4, float),
    "gait_period": (0.05, 10.0, float),
    "planner_rate": (0.5, 500.0, float),
}

COMMAND_TYPES = ("set_target", "set_weight", "set_param", "push",
                 "pause", "resume", "reset", "start_task")
UPDATE_TYPES = ("hello", "state_frame", "telemetry", "cost_frame",
                "ack", "nack", "task_catalog")


def _need(msg: dict, key: str, types) -> Any:
    if key not in msg:
        raise ProtocolError(f"message missing field '{key}'")
    val = msg[key]
    if not isinstance(val, types):
        raise ProtocolError(f"field '{key}' has wrong type")
    if isinstance(val, float) and not math.isfinite(val):
        raise ProtocolError(f"field '{key}' must be finite")
    return val


def _number(msg: dict, key: str) -> float:
    return float(_need(msg, key, (int, float)))


def validate_command(msg: dict) -> dict:
    """Validate a command message; returns it unchanged or raises."""
    if not isinstance(msg, dict):
        raise ProtocolError("command must be an object")
    ctype = _need(msg, "type", str)
    if ctype not in COMMAND_TYPES:
        raise ProtocolError(f"unknown command type '{ctype}'")
    _need(msg, "id", int)
    if ctype == "set_target":
        _number(msg, "x")
        _number(msg, "z")
    elif ctype == "set_weight":
        _need(msg, "term", str)
        if _number(msg, "value") < 0.0:
            raise ProtocolError("weight must be >= 0")
    elif ctype == "set_param":
        path = _need(msg, "path", str)
        if path not in PARAM_PATHS:
            raise ProtocolError(f"unknown parameter path '{path}'")
        lo, hi, kind = PARAM_PATHS[path]
        value = _number(msg, "value")
        if kind is int and value != int(value):
            raise ProtocolError(f"parameter '{path}' must be an integer")
        if not lo <= value <= hi:
            raise ProtocolError(
                f"parameter '{path}' must lie in [{lo}, {hi}]")
    elif ctype == "push":
        imp = _need(msg, "impulse", list)
        if len(imp) != 2 or not all(isinstance(v, (int, float))
                                    and math.isfinite(v) for v in imp):
            raise ProtocolError("impulse must be a finite [fx, fz] pair")
        if "body" in msg:
            _need(msg, "body", int)
    elif ctype == "start_task":
        _need(msg, "task", str)
    return msg


def validate_update(msg: dict) -> dict:
    if not isinstance(msg, dict):
        raise ProtocolError("update must be an object")
    utype = _need(msg, "type", str)
    if utype not in UPDATE_TYPES:
        raise ProtocolError(f"unknown update type '{utype}'")
    if utype == "hello":
        if _need(msg, "version", int) > SCHEMA_VERSION:
            raise ProtocolError("unsupported schema version")
        _need(msg, "role", str)
    elif utype in ("ack", "nack"):
        _need(msg, "id", int)
        if utype == "nack":
            _need(msg, "reason", str)
    elif utype == "state_frame":
        _number(msg, "t")
        _need(msg, "x", list)
    elif utype == "cost_frame":
        _number(msg, "t")
        _number(msg, "total")
        _need(msg, "terms", dict)
    elif utype == "telemetry":
        _number(msg, "t")
    elif utype == "task_catalog":
        _need(msg, "tasks", list)
    return msg


def encode(msg: dict) -> str:
    """Canonical wire form: compact JSON with sorted keys."""
    return json.dumps(msg, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def decode(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a 'type'")
    return msg


def decode_command(text: str) -> dict:
    return validate_command(decode(text))


def decode_update(text: str) -> dict:
    return validate_update(decode(text))


# Message constructors ---------------------------------------------------------

def hello(role: str, tasks: list[str]) -> dict:
    return {"type": "hello", "version": SCHEMA_VERSION, "role": role,
            "tasks": tasks}


def ack(cmd_id: int, applied: dict | None = None) -> dict:
    msg = {"type": "ack", "id": cmd_id}
    if applied:
        msg["applied"] = applied
    return msg


def nack(cmd_id: int, reason: str) -> dict:
    return {"type": "nack", "id": cmd_id, "reason": reason}
