import numpy as np
import pytest
from dataclasses import replace

from planarmpc.dynamics import (
    ContactParams, DiscreteModel, builtin_model, builtin_models,
    contact_forces, forward_chain, load_model, mass_matrix_and_bias,
    mechanical_energy, pd_torque,
)
from planarmpc.dynamics.simulate import _contact_force_components
from planarmpc.errors import ConfigError, DimensionError, DynamicsError


# --- builtin catalog ----------------------------------------------------------

def test_builtin_catalog(models):
    specs = builtin_models()
    names = [m.name for m in specs]
    assert names == ["pendulum", "cartpole", "hopper", "biped"]
    assert models["pendulum"].nq == 1
    assert not models["pendulum"].contact_points
    assert models["cartpole"].nq == 2
    assert not models["cartpole"].contact_points
    assert models["hopper"].floating_base
    assert models["hopper"].nq == 5
    assert len(models["hopper"].contact_points) == 1
    assert models["biped"].nq == 7
    assert len(models["biped"].contact_points) == 2


def test_all_models_step_finite(models, warm_kernels):
    for name, spec in models.items():
        dyn = warm_kernels[name]
        out = dyn.step(spec.default_state(), spec.home_control())
        assert np.all(np.isfinite(out))


# --- pd_torque ----------------------------------------------------------------

def test_pd_torque_zero_at_target(models):
    m = models["biped"]
    x = m.default_state()
    u = m.joint_positions(x)
    assert np.allclose(pd_torque(m, x, u), 0.0)


def test_pd_torque_arithmetic():
    # kp=10, kd=1, u-q = 0.1, v=0, limit 5 -> tau = 1.0
    doc = """
name: unit
floating_base: false
links:
  - {name: a, mass: 1.0, inertia: 0.1, length: 1.0}
joints:
  - {name: j, kind: revolute, parent: -1, kp: 10.0, kd: 1.0, torque_limit: 5.0}
"""
    m = load_model(doc)
    x = np.zeros(2)
    assert pd_torque(m, x, np.array([0.1])) == pytest.approx(1.0)
    # saturation: u-q = 10 -> clamp at 5
    assert pd_torque(m, x, np.array([10.0])) == pytest.approx(5.0)


def test_pd_torque_dimension_mismatch(models):
    m = models["biped"]
    with pytest.raises(DimensionError):
        pd_torque(m, m.default_state(), np.zeros(m.nu + 1))
    with pytest.raises(DimensionError):
        pd_torque(m, np.zeros(3), np.zeros(m.nu))


# --- contact forces -----------------------------------------------------------

def test_contact_zero_above_ground(models):
    m = models["hopper"]
    x = m.default_state()
    x[1] += 1.0  # foot a meter up
    f = contact_forces(m, x)
    assert np.all(f == 0.0)


def test_contact_static_penetration_saturated():
    # deep-contact regime: smoothing width well below the penetration
    cp = ContactParams(normal_stiffness=1.0e4, normal_damping=1e-9,
                       friction_coeff=1.0, slip_stiffness=1.0,
                       smoothing_width=2.0e-4)
    phi = np.array([-1.0e-3])
    n, t = _contact_force_components(cp, phi, np.zeros(1), np.zeros(1))
    assert n[0] == pytest.approx(10.0, rel=0.05)
    assert t[0] == 0.0


def test_contact_slip_stiffness_scales_presaturation():
    base = dict(normal_stiffness=2.0e4, normal_damping=1e-9,
                friction_coeff=1.0, smoothing_width=0.005)
    phi = np.array([-0.004])
    vt = np.array([1.0e-5])  # far below the friction-cone knee
    lo = _contact_force_components(ContactParams(slip_stiffness=1.0, **base),
                                   phi, np.zeros(1), vt)[1]
    hi = _contact_force_components(ContactParams(slip_stiffness=100.0, **base),
                                   phi, np.zeros(1), vt)[1]
    assert abs(hi[0]) >= 10.0 * abs(lo[0])


def test_contact_normal_nonnegative_and_cone(models, rng):
    m = models["biped"]
    mu = m.contact.friction_coeff
    for _ in range(200):
        x = m.default_state()
        x[:m.nq] += 0.2 * rng.standard_normal(m.nq)
        x[m.nq:] = 2.0 * rng.standard_normal(m.nq)
        f = contact_forces(m, x)
        n, t = f[:, 1], f[:, 0]
        assert np.all(n >= 0.0)
        assert np.all(np.abs(t) <= mu * n + 1e-9 * np.maximum(n, 1.0))


def test_contact_force_zero_exactly_beyond_smoothing(models):
    m = models["hopper"]
    cp = m.contact
    phi = np.array([cp.smoothing_width * 1.0001])
    n, t = _contact_force_components(cp, phi, np.array([-1.0]), np.array([2.0]))
    assert n[0] == 0.0 and t[0] == 0.0


# --- step ---------------------------------------------------------------------

def test_pendulum_equilibrium_fixed_point(models, warm_kernels):
    m = models["pendulum"]
    dyn = warm_kernels["pendulum"]
    x0 = m.default_state()
    x1 = dyn.step(x0, m.home_control())
    assert np.abs(x1 - x0).max() < 1e-12


def test_free_fall_matches_ballistic(models):
    # drop the hopper from high enough that contact stays inactive
    m = models["hopper"]
    dt = 0.01
    dyn = DiscreteModel(m, dt)
    x = m.default_state()
    x[1] = 6.0  # foot stays clear of the ground for the whole second
    u = m.home_control()
    chain = forward_chain(m, x[None, :m.nq], x[None, m.nq:])
    _, _, com0 = mass_matrix_and_bias(m, chain)
    T = 100
    for _ in range(T):
        x = dyn.step(x, u)
    chain = forward_chain(m, x[None, :m.nq], x[None, m.nq:])
    _, _, com1 = mass_matrix_and_bias(m, chain)
    t = T * dt
    expected_drop = 0.5 * m.gravity * t ** 2
    # semi-implicit Euler first-order error bound: 0.5 g h t per unit step
    tol = 0.6 * m.gravity * dyn.h * t + 1e-9
    assert abs((com0[0, 1] - com1[0, 1]) - expected_drop) < tol


@pytest.mark.parametrize("name,drop", [("hopper", 0.002), ("biped", 0.005)])
def test_drop_settles(models, name, drop):
    m = models[name]
    dyn = DiscreteModel(m, 0.001)
    x = m.default_state()
    x[1] += drop
    u = m.home_control()
    settled_at = None
    for k in range(2000):
        x = dyn.step(x, u)
        if k > 50 and np.abs(x[m.nq:]).max() < 1e-3:
            settled_at = (k + 1) * 0.001
            break
    assert settled_at is not None, "did not settle within 2 s"
    # final penetration under twice the smoothing width
    chain = forward_chain(m, x[None, :m.nq], x[None, m.nq:])
    for cp in m.contact_points:
        foot_z = chain.point_position(cp.body, cp.offset)[0, 1]
        assert foot_z > -2.0 * m.contact.smoothing_width


def test_step_determinism(models, warm_kernels, rng):
    for name, spec in models.items():
        dyn = warm_kernels[name]
        x = spec.default_state() + 0.01 * rng.standard_normal(spec.nx)
        u = spec.home_control()
        a = dyn.step(x, u)
        b = dyn.step(x, u)
        assert np.array_equal(a, b)
        # batched rows agree bitwise with single evaluation
        X = np.tile(x, (4, 1))
        U = np.tile(u, (4, 1))
        assert np.array_equal(dyn.step_batch(X, U)[0], a)


def test_numba_matches_numpy_reference(models, rng):
    for name, spec in models.items():
        fast = DiscreteModel(spec, 0.01)
        ref = DiscreteModel(spec, 0.01, backend="numpy")
        x = spec.default_state() + 0.02 * rng.standard_normal(spec.nx)
        u = spec.home_control() + 0.05 * rng.standard_normal(spec.nu)
        assert np.abs(fast.step(x, u) - ref.step(x, u)).max() < 1e-12


def test_smoothness_fd_ratio_through_contact(models, rng):
    """Directional FD error halves as eps halves, incl. contact transitions."""
    m = models["hopper"]
    dyn = DiscreteModel(m, 0.01)
    u = m.home_control()
    for dz in (0.05, 0.004, 0.0, -0.003):
        x = m.default_state()
        x[1] += dz
        x[m.nq:] = 0.1 * rng.standard_normal(m.nq)
        d = rng.standard_normal(m.nx)
        d /= np.linalg.norm(d)
        errs = []
        for eps in (1e-3, 5e-4, 2.5e-4):
            fwd = (dyn.step(x + eps * d, u) - dyn.step(x, u)) / eps
            ctr = (dyn.step(x + eps / 2 * d, u)
                   - dyn.step(x - eps / 2 * d, u)) / eps
            errs.append(np.linalg.norm(fwd - ctr))
        for e1, e2 in zip(errs, errs[1:]):
            assert e1 / e2 > 2.0 / 1.5 and e1 / e2 < 2.0 * 1.5


def test_energy_passive_pendulum():
    doc = """
name: passive
floating_base: false
links:
  - {name: rod, mass: 1.0, inertia: 0.0833, length: 1.0, com: [0.5, 0.0]}
joints:
  - {name: pivot, kind: revolute, parent: -1, ref: -1.5707963267948966,
     damping: 0.0, actuated: false}
"""
    m = load_model(doc)
    u = np.zeros(0)

    def max_rise(dt):
        dyn = DiscreteModel(m, dt)
        x = np.array([2.0, 0.0])  # big swing
        e0 = mechanical_energy(m, x)
        worst = 0.0
        for _ in range(int(2.0 / dt)):
            x = dyn.step(x, u)
            worst = max(worst, mechanical_energy(m, x) - e0)
        return worst

    r1 = max_rise(0.01)
    r2 = max_rise(0.005)
    scale = m.links[0].mass * m.gravity * m.links[0].length
    assert r1 < 0.05 * scale          # bounded energy error
    assert r2 < r1 * 0.75             # shrinks with dt (first-order bound)

    # with damping, energy is non-increasing up to the integrator bound
    md = load_model(doc.replace("damping: 0.0", "damping: 0.1"))
    dyn = DiscreteModel(md, 0.01)
    x = np.array([2.0, 0.0])
    e_prev = mechanical_energy(md, x)
    tol = 0.05 * scale * dyn.dt
    for _ in range(200):
        x = dyn.step(x, u)
        e = mechanical_energy(md, x)
        assert e <= e_prev + tol
        e_prev = e


def test_step_rejects_nonfinite(models, warm_kernels):
    dyn = warm_kernels["biped"]
    x = models["biped"].default_state()
    x[0] = np.nan
    with pytest.raises(DynamicsError):
        dyn.step(x, models["biped"].home_control())


def test_step_reports_blowup_not_nan(models):
    # absurdly stiff contact at huge dt forced through one substep
    m = models["hopper"].with_contact(normal_stiffness=1e14, normal_damping=1e14)
    dyn = DiscreteModel(m, 0.01, substeps=1)
    x = m.default_state()
    x[1] -= 0.05  # deep penetration
    x_next = x
    with pytest.raises(DynamicsError):
        for _ in range(50):
            x_next = dyn.step(x_next, m.home_control())


# --- model files ----------------------------------------------------------------

def test_loader_reports_line_numbers():
    bad = """
name: broken
floating_base: false
links:
  - {name: a, mass: -1.0, inertia: 0.1, length: 1.0}
joints: []
"""
    with pytest.raises(ConfigError, match=r"line 5"):
        load_model(bad)


def test_loader_rejects_unknown_fields():
    bad = """
name: broken
floating_base: false
links:
  - {name: a, mass: 1.0, inertia: 0.1, length: 1.0, bogus: 2}
joints: []
"""
    with pytest.raises(ConfigError, match="bogus"):
        load_model(bad)


def test_loader_validates_joint_parent():
    bad = """
name: broken
floating_base: false
links:
  - {name: a, mass: 1.0, inertia: 0.1, length: 1.0}
joints:
  - {name: j, kind: revolute, parent: 3, kp: 1.0, kd: 0.1}
"""
    with pytest.raises(ConfigError, match="parent"):
        load_model(bad)


def test_contact_params_invariants():
    with pytest.raises(ConfigError):
        ContactParams(friction_coeff=2.5)
    with pytest.raises(ConfigError):
        ContactParams(slip_stiffness=0.5)
    with pytest.raises(ConfigError):
        ContactParams(smoothing_width=0.0)


def test_model_immutability(models):
    with pytest.raises(Exception):
        models["biped"].gravity = 1.0
