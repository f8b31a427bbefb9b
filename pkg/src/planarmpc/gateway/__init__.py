"""Operator surface: CLI experiments, session protocol, live server."""

from .experiments import EXPERIMENTS, run_experiment
from .protocol import SCHEMA_VERSION, decode, decode_command, decode_update, \
    encode, validate_command, validate_update

__all__ = [
    "EXPERIMENTS", "SCHEMA_VERSION", "decode", "decode_command",
    "decode_update", "encode", "run_experiment", "validate_command",
    "validate_update",
]
