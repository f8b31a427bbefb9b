"""Batched forward kinematics and derivatives for planar link trees.

Everything here operates on a batch axis so that finite-difference
perturbation sets and line-search candidates evaluate in one pass of
vectorized numpy. Shapes: ``q, v`` are ``(B, nq)``; per-body quantities are
``(B, nb, ...)``.

Because body angles are linear in the configuration for planar
revolute/prismatic trees, the angle Jacobian ``Ja`` is constant and the
angular bias acceleration vanishes; only the translational bias (centripetal
and Coriolis terms) needs propagating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FloatArray, ModelSpec, PRISMATIC, REVOLUTE


def rot(a: FloatArray, vec) -> FloatArray:
    """Apply R(a) to a 2-vector; ``a`` is (B,), ``vec`` is (2,) or (B, 2)."""
    c, s = np.cos(a), np.sin(a)
    vx, vz = np.moveaxis(np.broadcast_to(vec, a.shape + (2,)), -1, 0)
    return np.stack([c * vx - s * vz, s * vx + c * vz], axis=-1)


def rot_prime(a: FloatArray, vec) -> FloatArray:
    """Apply dR/da to a 2-vector (same shapes as :func:`rot`)."""
    c, s = np.cos(a), np.sin(a)
    vx, vz = np.moveaxis(np.broadcast_to(vec, a.shape + (2,)), -1, 0)
    return np.stack([-s * vx - c * vz, c * vx - s * vz], axis=-1)


@dataclass
class ChainState:
    """Per-body pose, Jacobians, velocities, and bias accelerations."""

    origin: FloatArray       # (B, nb, 2)
    angle: FloatArray        # (B, nb)
    jac_origin: FloatArray   # (B, nb, 2, nq)
    jac_angle: FloatArray    # (nb, nq), constant per model
    lin_vel: FloatArray      # (B, nb, 2)
    ang_vel: FloatArray      # (B, nb)
    bias: FloatArray         # (B, nb, 2); linear acceleration when vdot = 0

    def point(self, body: int, offset) -> tuple[FloatArray, ...]:
        """World position, Jacobian, velocity, and bias of a body-fixed point."""
        a = self.angle[:, body]
        r = rot(a, offset)
        rp = rot_prime(a, offset)
        ja = self.jac_angle[body]
        p = self.origin[:, body] + r
        jac = self.jac_origin[:, body] + rp[:, :, None] * ja
        vel = self.lin_vel[:, body] + self.ang_vel[:, body, None] * rp
        bias = self.bias[:, body] - (self.ang_vel[:, body] ** 2)[:, None] * r
        return p, jac, vel, bias

    def point_position(self, body: int, offset) -> FloatArray:
        return self.origin[:, body] + rot(self.angle[:, body], offset)


def constant_angle_jacobian(spec: ModelSpec) -> FloatArray:
    """(nb, nq) matrix of d(body angle)/dq, constant for planar trees."""
    nb, nq = spec.n_bodies, spec.nq
    ja = np.zeros((nb, nq))
    base = 1 if spec.floating_base else 0
    if spec.floating_base:
        ja[0, 2] = 1.0
    for j, joint in enumerate(spec.joints):
        child = base + j
        parent_row = np.zeros(nq) if joint.parent < 0 else ja[joint.parent]
        ja[child] = parent_row
        if joint.kind == REVOLUTE:
            ja[child, spec.joint_dof(j)] += 1.0
    return ja


def forward_chain(spec: ModelSpec, q: FloatArray, v: FloatArray,
                  jac_angle: FloatArray | None = None) -> ChainState:
    """Propagate poses, Jacobians, velocities, and bias terms down the tree."""
    B, nq = q.shape
    nb = spec.n_bodies
    origin = np.zeros((B, nb, 2))
    angle = np.zeros((B, nb))
    jac_origin = np.zeros((B, nb, 2, nq))
    lin_vel = np.zeros((B, nb, 2))
    ang_vel = np.zeros((B, nb))
    bias = np.zeros((B, nb, 2))
    if jac_angle is None:
        jac_angle = constant_angle_jacobian(spec)

    base = 0
    if spec.floating_base:
        base = 1
        origin[:, 0, 0] = q[:, 0]
        origin[:, 0, 1] = q[:, 1]
        angle[:, 0] = q[:, 2]
        jac_origin[:, 0, 0, 0] = 1.0
        jac_origin[:, 0, 1, 1] = 1.0
        lin_vel[:, 0] = v[:, :2]
        ang_vel[:, 0] = v[:, 2]

    zeros2 = np.zeros((B, 2))
    zerosj = np.zeros((B, 2, nq))
    zeros1 = np.zeros(B)
    for j, joint in enumerate(spec.joints):
        c = base + j
        p = joint.parent
        if p < 0:
            op, ap, jop = zeros2, zeros1, zerosj
            vop, omp, bop = zeros2, zeros1, zeros2
        else:
            op, ap, jop = origin[:, p], angle[:, p], jac_origin[:, p]
            vop, omp, bop = lin_vel[:, p], ang_vel[:, p], bias[:, p]
        dof = spec.joint_dof(j)
        qj, vj = q[:, dof], v[:, dof]
        jap = jac_angle[p] if p >= 0 else np.zeros(nq)
        anchor = np.asarray(joint.anchor)

        if joint.kind == REVOLUTE:
            r = rot(ap, anchor)
            rp = rot_prime(ap, anchor)
            angle[:, c] = ap + joint.ref + qj
            origin[:, c] = op + r
            jac_origin[:, c] = jop + rp[:, :, None] * jap
            lin_vel[:, c] = vop + omp[:, None] * rp
            ang_vel[:, c] = omp + vj
            bias[:, c] = bop - (omp ** 2)[:, None] * r
        elif joint.kind == PRISMATIC:
            axis = np.asarray(joint.axis)
            w = anchor + qj[:, None] * axis
            rw = rot(ap, w)
            rpw = rot_prime(ap, w)
            rd = rot(ap, axis)
            rpd = rot_prime(ap, axis)
            angle[:, c] = ap + joint.ref
            origin[:, c] = op + rw
            e_dof = np.zeros(nq)
            e_dof[dof] = 1.0
            jac_origin[:, c] = jop + rpw[:, :, None] * jap + rd[:, :, None] * e_dof
            lin_vel[:, c] = vop + omp[:, None] * rpw + vj[:, None] * rd
            ang_vel[:, c] = omp
            bias[:, c] = (bop - (omp ** 2)[:, None] * rw
                          + 2.0 * (omp * vj)[:, None] * rpd)
        else:  # pragma: no cover - rejected at construction
            raise AssertionError(joint.kind)

    return ChainState(origin, angle, jac_origin, jac_angle,
                      lin_vel, ang_vel, bias)


def mass_matrix_and_bias(spec: ModelSpec, chain: ChainState
                         ) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Joint-space mass matrix, gravity+inertial generalized force, CoM rows.

    Returns ``(M, rhs_passive, com)`` where ``rhs_passive`` collects gravity
    and velocity-product terms and ``com`` is the whole-body center of mass
    (B, 2).
    """
    B = chain.angle.shape[0]
    nq = spec.nq
    M = np.zeros((B, nq, nq))
    rhs = np.zeros((B, nq))
    weighted = np.zeros((B, 2))
    total_mass = 0.0
    for b, link in enumerate(spec.links):
        p, jac, _, bias = chain.point(b, np.asarray(link.com))
        M += link.mass * np.einsum("bik,bil->bkl", jac, jac)
        ja = chain.jac_angle[b]
        M += link.inertia * np.outer(ja, ja)
        rhs -= link.mass * spec.gravity * jac[:, 1, :]
        rhs -= link.mass * np.einsum("bik,bi->bk", jac, bias)
        weighted += link.mass * p
        total_mass += link.mass
    return M, rhs, weighted / total_mass


def body_segments(spec: ModelSpec, q: FloatArray) -> FloatArray:
    """(B, nb, 2, 2) world endpoints of each link, for rendering and logs."""
    v = np.zeros_like(q)
    chain = forward_chain(spec, q, v)
    tips = np.stack([chain.point_position(b, (link.length, 0.0))
                     for b, link in enumerate(spec.links)], axis=1)
    return np.stack([chain.origin, tips], axis=2)
