import numpy as np
import pytest

from planarmpc.dynamics import DiscreteModel, builtin_model


@pytest.fixture(scope="session")
def models():
    return {name: builtin_model(name)
            for name in ("pendulum", "cartpole", "hopper", "biped")}


@pytest.fixture(scope="session")
def warm_kernels(models):
    """Compile the numba kernel for every model once per session."""
    dyns = {}
    for name, spec in models.items():
        dyn = DiscreteModel(spec, 0.01)
        x = spec.default_state()
        dyn.step(x, spec.home_control())
        dyns[name] = dyn
    return dyns


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
