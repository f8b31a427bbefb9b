import numpy as np
import pytest

from planarmpc.derivs import (
    CENTERED, EvalCounter, FdConfig, evaluation_knots, fd_jacobians,
    linearize_trajectory,
)
from planarmpc.dynamics import DiscreteModel, builtin_model
from planarmpc.errors import ConfigError
from planarmpc.solver import LinearDiscreteModel


class CountingLinear(LinearDiscreteModel):
    """Linear model that counts its own step evaluations."""

    def __init__(self, A, B):
        super().__init__(A, B)
        self.calls = 0

    def step(self, x, u):
        self.calls += 1
        return super().step(x, u)

    def step_batch(self, X, U):
        self.calls += X.shape[0]
        return super().step_batch(X, U)


@pytest.fixture
def linear_sys(rng):
    A = rng.standard_normal((4, 4)) * 0.3 + np.eye(4)
    B = rng.standard_normal((4, 2)) * 0.5
    return CountingLinear(A, B)


def test_fd_exact_on_linear(linear_sys, rng):
    x = rng.standard_normal(4)
    u = rng.standard_normal(2)
    for scheme in ("forward", "centered"):
        A, B = fd_jacobians(linear_sys, x, u, FdConfig(epsilon=1e-6,
                                                       scheme=scheme))
        assert np.abs(A - linear_sys.A).max() < 1e-6
        assert np.abs(B - linear_sys.B).max() < 1e-6


def test_fd_evaluation_cost(linear_sys, rng):
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    nx, nu = 4, 2
    c = EvalCounter()
    fd_jacobians(linear_sys, x, u, FdConfig(scheme="forward"), c)
    assert c.steps == nx + nu + 1
    c = EvalCounter()
    fd_jacobians(linear_sys, x, u, FdConfig(scheme="centered"), c)
    assert c.steps == 2 * (nx + nu)


def test_pendulum_matches_analytic_linearization():
    m = builtin_model("pendulum")
    dt = 0.01
    dyn = DiscreteModel(m, dt)
    joint = m.joints[0]
    link = m.links[0]
    # hanging rest; PD holds the joint at zero
    x = np.zeros(2)
    u = np.zeros(1)
    # pivot-frame dynamics: I_p a = -m g lc sin(q) - (b + kd) v + kp (u - q)
    inertia_p = link.inertia + link.mass * link.com[0] ** 2
    aq = (-link.mass * m.gravity * link.com[0] - joint.kp) / inertia_p
    av = (-joint.damping - joint.kd) / inertia_p
    # one semi-implicit Euler substep: v' = v + h(aq q + av v), q' = q + h v'
    h = dyn.h
    A_sub = np.array([[1 + h * h * aq, h * (1 + h * av)],
                      [h * aq, 1 + h * av]])
    A_exact = np.linalg.matrix_power(A_sub, dyn.substeps)
    A_fd, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=1e-6))
    assert np.abs(A_fd - A_exact).max() < 1e-4


def test_contact_jacobian_converges_with_epsilon(rng):
    m = builtin_model("hopper")
    dyn = DiscreteModel(m, 0.01)
    x = m.default_state()
    x[m.nq:] = 0.05 * rng.standard_normal(m.nq)
    u = m.home_control()
    diffs = []
    for eps in (4e-5, 2e-5, 1e-5):
        A1, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=eps))
        A2, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=eps / 2))
        assert np.all(np.isfinite(A1))
        diffs.append(np.linalg.norm(A1 - A2))
    assert diffs[0] > diffs[1] > diffs[2]


def test_forward_error_scales_linearly():
    """O(eps): doubling eps roughly doubles the error on a smooth system."""
    m = builtin_model("pendulum")
    dyn = DiscreteModel(m, 0.01)
    x = np.array([0.7, -0.3])
    u = np.array([0.2])
    ref, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=1e-7, scheme=CENTERED))
    errs = []
    for eps in (1e-4, 5e-5, 2.5e-5):
        A, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=eps))
        errs.append(np.abs(A - ref).max())
    for e1, e2 in zip(errs, errs[1:]):
        assert 2.0 / 1.5 < e1 / e2 < 2.0 * 1.5


def test_centered_at_least_as_accurate():
    m = builtin_model("cartpole")
    dyn = DiscreteModel(m, 0.01)
    x = np.array([0.1, 0.6, -0.2, 0.4])
    u = np.array([0.3])
    ref, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=1e-7, scheme=CENTERED))
    fwd, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=1e-4))
    ctr, _ = fd_jacobians(dyn, x, u, FdConfig(epsilon=1e-4, scheme=CENTERED))
    assert np.abs(ctr - ref).max() <= np.abs(fwd - ref).max()


# --- trajectory linearization ---------------------------------------------------

def test_skip_zero_evaluates_everything(linear_sys, rng):
    T = 10
    states = rng.standard_normal((T + 1, 4))
    controls = rng.standard_normal((T, 2))
    lin = linearize_trajectory(linear_sys, states, controls, FdConfig())
    assert lin.evaluated_mask.all()


def test_skip_matches_pointwise_bitexact(rng):
    m = builtin_model("hopper")
    dyn = DiscreteModel(m, 0.01)
    T = 6
    states = np.tile(m.default_state(), (T + 1, 1))
    states[:, m.nq:] += 0.01 * rng.standard_normal((T + 1, m.nq))
    controls = np.tile(m.home_control(), (T, 1))
    cfg = FdConfig()
    lin = linearize_trajectory(dyn, states, controls, cfg)
    for t in range(T):
        A, B = fd_jacobians(dyn, states[t], controls[t], cfg)
        assert np.array_equal(lin.A[t], A)
        assert np.array_equal(lin.B[t], B)


def test_skip_counting_and_reduction(linear_sys, rng):
    T = 35
    states = rng.standard_normal((T + 1, 4))
    controls = rng.standard_normal((T, 2))
    counts = {}
    for skip in (0, 3):
        c = EvalCounter()
        lin = linearize_trajectory(linear_sys, states, controls,
                                   FdConfig(skip_deriv=skip), c)
        counts[skip] = c.steps
        assert lin.evaluated_mask.sum() == len(evaluation_knots(T, skip))
    per_knot = 4 + 2 + 1
    assert counts[0] == T * per_knot
    assert counts[3] == len(evaluation_knots(T, 3)) * per_knot
    assert len(evaluation_knots(T, 3)) <= int(np.ceil(T / 4)) + 1
    assert counts[3] <= 0.3 * counts[0]  # >= 70% fewer evaluations


def test_skip_interpolation_exact_on_lti(linear_sys, rng):
    T = 20
    states = rng.standard_normal((T + 1, 4))
    controls = rng.standard_normal((T, 2))
    for skip in (1, 3, 7):
        lin = linearize_trajectory(linear_sys, states, controls,
                                   FdConfig(skip_deriv=skip))
        for t in range(T):
            assert np.abs(lin.A[t] - linear_sys.A).max() < 1e-6
            assert np.abs(lin.B[t] - linear_sys.B).max() < 1e-6


def test_counter_matches_actual_calls(linear_sys, rng):
    T = 17
    states = rng.standard_normal((T + 1, 4))
    controls = rng.standard_normal((T, 2))
    for skip in (0, 2, 5):
        linear_sys.calls = 0
        c = EvalCounter()
        linearize_trajectory(linear_sys, states, controls,
                             FdConfig(skip_deriv=skip), c)
        assert c.steps == linear_sys.calls


def test_fd_config_validation():
    with pytest.raises(ConfigError):
        FdConfig(epsilon=0.0)
    with pytest.raises(ConfigError):
        FdConfig(scheme="midpoint")
    with pytest.raises(ConfigError):
        FdConfig(skip_deriv=-1)


def test_shared_residual_pass(linear_sys, rng):
    """Residual Jacobians ride along with the dynamics FD in one pass."""
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    C = rng.standard_normal((3, 4))
    D = rng.standard_normal((3, 2))

    def res(X, U):
        return X @ C.T + U @ D.T

    A, B, (r0, Jrx, Jru) = fd_jacobians(
        linear_sys, x, u, FdConfig(), residual_fn=res)
    assert np.abs(Jrx - C).max() < 1e-6
    assert np.abs(Jru - D).max() < 1e-6
    assert np.allclose(r0, C @ x + D @ u)
