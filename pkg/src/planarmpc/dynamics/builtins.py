"""Bundled benchmark models, loaded from the packaged model files."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..errors import ConfigError
from .model import ModelSpec, load_model

_BUILTIN_NAMES = ("pendulum", "cartpole", "hopper", "biped")


@lru_cache(maxsize=None)
def builtin_model(name: str) -> ModelSpec:
    if name not in _BUILTIN_NAMES:
        raise ConfigError(
            f"unknown builtin model '{name}'; available: {', '.join(_BUILTIN_NAMES)}")
    ref = resources.files("planarmpc.data.models") / f"{name}.yaml"
    spec = load_model(ref.read_text(encoding="utf-8"), name_hint=f"{name}.yaml")
    if spec.name != name:
        raise ConfigError(f"model file {name}.yaml declares name '{spec.name}'")
    return spec


def builtin_models() -> list[ModelSpec]:
    return [builtin_model(name) for name in _BUILTIN_NAMES]
