"""Smooth soft-contact forward dynamics with an embedded joint PD controller.

The discrete step is semi-implicit Euler with internal substepping. The
substep count is fixed per (model, dt) pair at construction time from a
stability bound on the stiffest contact spring/damper and PD gains, so the
discrete map stays a smooth, deterministic function of the state: the same
inputs always integrate through the same substep schedule.

Ground contact is a compactly supported C1 spring-damper: the spring
deflection blends quadratically over ``smoothing_width`` so the force is
exactly zero above the blend zone and matches a linear spring in deep
penetration. Friction is regularized Coulomb: a viscous pre-saturation slope
(scaled by ``slip_stiffness``) blended smoothly into the friction-cone bound
``mu * N`` by a harmonic soft-min, which keeps the tangential force smooth in
the state and strictly inside the cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, DynamicsError
from .kinematics import ChainState, constant_angle_jacobian, forward_chain, \
    mass_matrix_and_bias
from .model import ContactParams, FloatArray, ModelSpec

# Velocity scale regularizing the friction-cone bound near zero slip.
REG_SLIP_VEL = 1.0e-3
# Fraction of the analytic stability limit used for the substep size.
SUBSTEP_SAFETY = 0.5
MAX_SUBSTEPS = 2000


def pd_torque(spec: ModelSpec, x: FloatArray, u: FloatArray) -> FloatArray:
    """Clamped PD torques for the actuated joints, tau = kp(u - q) - kd v."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    U = np.atleast_2d(spec.check_control(u))
    if X.shape[-1] != spec.nx:
        raise DimensionError(
            f"state has {X.shape[-1]} entries, model '{spec.name}' expects {spec.nx}")
    q, v = X[:, :spec.nq], X[:, spec.nq:]
    tau = np.zeros((X.shape[0], spec.nu))
    for i, j in enumerate(spec.actuated_joints):
        joint = spec.joints[j]
        dof = spec.joint_dof(j)
        raw = joint.kp * (U[:, i] - q[:, dof]) - joint.kd * v[:, dof]
        tau[:, i] = np.clip(raw, -joint.torque_limit, joint.torque_limit)
    return tau[0] if squeeze else tau


def _spring_deflection(phi: FloatArray, s: float) -> FloatArray:
    """C1 deflection: 0 above +s, quadratic blend in [-s, s], -phi below -s."""
    blend = (s - phi) ** 2 / (4.0 * s)
    return np.where(phi >= s, 0.0, np.where(phi <= -s, -phi, blend))


def _contact_force_components(cp: ContactParams, phi: FloatArray,
                              phidot: FloatArray, vt: FloatArray
                              ) -> tuple[FloatArray, FloatArray]:
    """Normal and tangential force for one contact point (batched)."""
    s = cp.smoothing_width
    d = _spring_deflection(phi, s)
    activation = np.tanh(d / s)
    normal = cp.normal_stiffness * d - cp.normal_damping * phidot * activation
    normal = np.maximum(normal, 0.0)

    visc = cp.slip_stiffness * cp.normal_stiffness * s
    speed = np.sqrt(vt * vt + REG_SLIP_VEL ** 2)
    cone = cp.friction_coeff * normal / speed
    coeff = visc * cone / (visc + cone)  # harmonic soft-min <= min(visc, cone)
    tangential = -coeff * vt
    return normal, tangential


def contact_forces(spec: ModelSpec, x: FloatArray,
                   chain: ChainState | None = None) -> FloatArray:
    """World-frame (fx, fz) force at each contact point; shape (..., nc, 2)."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    q, v = X[:, :spec.nq], X[:, spec.nq:]
    if chain is None:
        chain = forward_chain(spec, q, v)
    forces = np.zeros((X.shape[0], len(spec.contact_points), 2))
    for i, cpnt in enumerate(spec.contact_points):
        p, _, vel, _ = chain.point(cpnt.body, np.asarray(cpnt.offset))
        normal, tangential = _contact_force_components(
            spec.contact, p[:, 1], vel[:, 1], vel[:, 0])
        forces[:, i, 0] = tangential
        forces[:, i, 1] = normal
    return forces[0] if squeeze else forces


def mechanical_energy(spec: ModelSpec, x: FloatArray) -> float:
    """Kinetic plus gravitational potential energy (contact springs excluded)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    q, v = X[:, :spec.nq], X[:, spec.nq:]
    chain = forward_chain(spec, q, v)
    total = np.zeros(X.shape[0])
    for b, link in enumerate(spec.links):
        p, _, vel, _ = chain.point(b, np.asarray(link.com))
        total += 0.5 * link.mass * np.sum(vel ** 2, axis=-1)
        total += 0.5 * link.inertia * chain.ang_vel[:, b] ** 2
        total += link.mass * spec.gravity * p[:, 1]
    return float(total[0]) if np.asarray(x).ndim == 1 else total


def apply_impulse(spec: ModelSpec, x: FloatArray, body: int,
                  impulse: tuple[float, float]) -> FloatArray:
    """Instantaneous velocity jump from a world-frame impulse at a body CoM."""
    X = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    q, v = X[:, :spec.nq], X[:, spec.nq:]
    chain = forward_chain(spec, q, v)
    M, _, _ = mass_matrix_and_bias(spec, chain)
    _, jac, _, _ = chain.point(body, np.asarray(spec.links[body].com))
    gen = np.einsum("bik,bi->bk", jac, np.broadcast_to(impulse, (X.shape[0], 2)))
    dv = np.linalg.solve(M, gen[..., None])[..., 0]
    X[:, spec.nq:] += dv
    return X[0] if np.asarray(x).ndim == 1 else X


class DiscreteModel:
    """Discrete-time dynamics ``x' = f(x, u)`` over a fixed step ``dt``.

    Pure and reentrant: all mutable work is local to the call. Controls are
    clamped to the actuated joints' position limits before use. The default
    backend is the numba kernel; ``backend="numpy"`` selects the vectorized
    reference path used for cross-validation.
    """

    def __init__(self, spec: ModelSpec, dt: float,
                 substeps: int | None = None, backend: str = "numba") -> None:
        if not dt > 0.0:
            raise DynamicsError("dt must be > 0")
        self.spec = spec
        self.dt = float(dt)
        self._jac_angle = constant_angle_jacobian(spec)
        self._u_lo, self._u_hi = spec.control_limits()
        self._damping = np.zeros(spec.nq)
        for j, joint in enumerate(spec.joints):
            self._damping[spec.joint_dof(j)] = joint.damping
        from . import _kernels
        self._kernel = _kernels.substep_batch
        self.backend = backend if _kernels.HAVE_NUMBA else "numpy"
        self._consts = self._pack_constants()
        self.substeps = substeps if substeps is not None \
            else self._stable_substeps()
        self.h = self.dt / self.substeps

    def _pack_constants(self) -> tuple:
        spec = self.spec
        nj = len(spec.joints)
        jkind = np.array([0 if j.kind == "revolute" else 1
                          for j in spec.joints], dtype=np.int64)
        jparent = np.array([j.parent for j in spec.joints], dtype=np.int64)
        janchor = np.array([j.anchor for j in spec.joints],
                           dtype=float).reshape(nj, 2)
        jaxis = np.array([j.axis for j in spec.joints],
                         dtype=float).reshape(nj, 2)
        jref = np.array([j.ref for j in spec.joints], dtype=float)
        jdof = np.array([spec.joint_dof(j) for j in range(nj)], dtype=np.int64)
        jdamp = np.array([j.damping for j in spec.joints], dtype=float)
        jkp = np.array([j.kp for j in spec.joints], dtype=float)
        jkd = np.array([j.kd for j in spec.joints], dtype=float)
        jtlim = np.array([j.torque_limit for j in spec.joints], dtype=float)
        juidx = np.full(nj, -1, dtype=np.int64)
        for i, j in enumerate(spec.actuated_joints):
            juidx[j] = i
        lmass = np.array([l.mass for l in spec.links], dtype=float)
        linertia = np.array([l.inertia for l in spec.links], dtype=float)
        lcom = np.array([l.com for l in spec.links],
                        dtype=float).reshape(len(spec.links), 2)
        nc = len(spec.contact_points)
        cbody = np.array([c.body for c in spec.contact_points], dtype=np.int64)
        coffset = np.array([c.offset for c in spec.contact_points],
                           dtype=float).reshape(nc, 2)
        cp = spec.contact
        return (1 if spec.floating_base else 0, jkind, jparent, janchor,
                jaxis, jref, jdof, jdamp, jkp, jkd, jtlim, juidx,
                lmass, linertia, lcom, self._jac_angle, cbody, coffset,
                cp.normal_stiffness, cp.normal_damping, cp.friction_coeff,
                cp.slip_stiffness, cp.smoothing_width, spec.gravity)

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def nu(self) -> int:
        return self.spec.nu

    def _stable_substeps(self) -> int:
        spec = self.spec
        x0 = spec.default_state()
        chain = forward_chain(spec, x0[None, :spec.nq], x0[None, spec.nq:],
                              self._jac_angle)
        M, _, _ = mass_matrix_and_bias(spec, chain)
        try:
            Minv = np.linalg.inv(M[0])
        except np.linalg.LinAlgError as exc:
            raise DynamicsError(
                f"model '{spec.name}': singular mass matrix at default state") from exc

        h_max = math.inf
        cp = spec.contact
        for cpnt in spec.contact_points:
            _, jac, _, _ = chain.point(cpnt.body, np.asarray(cpnt.offset))
            for row, coeff in ((jac[0, 1], cp.normal_damping),
                               (jac[0, 0], cp.slip_stiffness
                                * cp.normal_stiffness * cp.smoothing_width)):
                m_eff = 1.0 / max(row @ Minv @ row, 1e-12)
                h_max = min(h_max, 2.0 / math.sqrt(cp.normal_stiffness / m_eff))
                if coeff > 0.0:
                    h_max = min(h_max, 2.0 * m_eff / coeff)
        for j, joint in enumerate(spec.joints):
            dof = spec.joint_dof(j)
            i_eff = 1.0 / max(Minv[dof, dof], 1e-12)
            if joint.kp > 0.0:
                h_max = min(h_max, 2.0 / math.sqrt(joint.kp / i_eff))
            rate_coeff = joint.kd + joint.damping
            if rate_coeff > 0.0:
                h_max = min(h_max, 2.0 * i_eff / rate_coeff)
        if not math.isfinite(h_max):
            return 1
        n = max(1, math.ceil(self.dt / (SUBSTEP_SAFETY * h_max)))
        if n > MAX_SUBSTEPS:
            raise DynamicsError(
                f"model '{spec.name}': dt={self.dt} needs {n} substeps "
                f"(> {MAX_SUBSTEPS}); soften the contact or reduce dt")
        return n

    def clamp_control(self, u: FloatArray) -> FloatArray:
        return np.clip(u, self._u_lo, self._u_hi)

    def neutral_control(self, x: FloatArray) -> FloatArray:
        """Hold-still control: current positions of the actuated joints."""
        q = np.asarray(x, dtype=float)[..., :self.spec.nq]
        idx = [self.spec.joint_dof(j) for j in self.spec.actuated_joints]
        return q[..., idx].copy()

    def step(self, x: FloatArray, u: FloatArray) -> FloatArray:
        return self.step_batch(np.asarray(x, dtype=float)[None, :],
                               np.asarray(u, dtype=float)[None, :])[0]

    def step_batch(self, X: FloatArray, U: FloatArray) -> FloatArray:
        spec = self.spec
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        if X.shape[-1] != spec.nx:
            raise DimensionError(
                f"state has {X.shape[-1]} entries, expected {spec.nx}")
        if U.shape[-1] != spec.nu:
            raise DimensionError(
                f"control has {U.shape[-1]} entries, expected {spec.nu}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(U))):
            raise DynamicsError("non-finite state or control")

        q = X[:, :spec.nq].copy()  # kernel integrates in place
        v = X[:, spec.nq:].copy()
        U = np.clip(U, self._u_lo, self._u_hi)

        if self.backend == "numba":
            try:
                status = self._kernel(q, v, np.ascontiguousarray(U),
                                      self.substeps, self.h, *self._consts)
            except np.linalg.LinAlgError as exc:
                raise DynamicsError(
                    f"model '{spec.name}': singular mass matrix") from exc
            if status != 0:
                raise DynamicsError(
                    f"model '{spec.name}': non-finite acceleration")
            return np.concatenate([q, v], axis=-1)
        return self._step_batch_numpy(q, v, U)

    def _step_batch_numpy(self, q: FloatArray, v: FloatArray,
                          U: FloatArray) -> FloatArray:
        spec = self.spec
        h = self.h
        cp = spec.contact
        dofs = [spec.joint_dof(j) for j in spec.actuated_joints]

        for _ in range(self.substeps):
            chain = forward_chain(spec, q, v, self._jac_angle)
            M, rhs, _ = mass_matrix_and_bias(spec, chain)

            for i, j in enumerate(spec.actuated_joints):
                joint = spec.joints[j]
                dof = dofs[i]
                raw = joint.kp * (U[:, i] - q[:, dof]) - joint.kd * v[:, dof]
                rhs[:, dof] += np.clip(raw, -joint.torque_limit,
                                       joint.torque_limit)
            rhs -= self._damping * v

            for cpnt in spec.contact_points:
                p, jac, vel, _ = chain.point(cpnt.body, np.asarray(cpnt.offset))
                normal, tangential = _contact_force_components(
                    cp, p[:, 1], vel[:, 1], vel[:, 0])
                rhs += jac[:, 0, :] * tangential[:, None]
                rhs += jac[:, 1, :] * normal[:, None]

            try:
                accel = np.linalg.solve(M, rhs[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise DynamicsError(
                    f"model '{spec.name}': singular mass matrix") from exc
            if not np.all(np.isfinite(accel)):
                raise DynamicsError(
                    f"model '{spec.name}': non-finite acceleration")
            v = v + h * accel
            q = q + h * v

        return np.concatenate([q, v], axis=-1)
