"""Numba inner loop for the semi-implicit substep integrator.

The kernel mirrors the numpy reference path in ``simulate.py`` exactly
(same force model, same integration order); tests cross-validate the two.
Rows of the batch are integrated independently, so single-state and batched
calls produce bit-identical trajectories.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


REG_SLIP_VEL_SQ = 1.0e-6  # (1e-3 m/s)^2, matches simulate.REG_SLIP_VEL


@njit(cache=True)
def substep_batch(q, v, U, nsub, h, floating,
                  jkind, jparent, janchor, jaxis, jref, jdof,
                  jdamp, jkp, jkd, jtlim, juidx,
                  lmass, linertia, lcom, ja,
                  cbody, coffset, kn, cn, mu, slip, sw, gravity):
    """Integrate nsub substeps in place. Returns 0 on success, 1 on NaN."""
    B, nq = q.shape
    nb = lmass.shape[0]
    nj = jkind.shape[0]
    nc = cbody.shape[0]
    base = 1 if floating else 0

    o = np.zeros((nb, 2))
    a = np.zeros(nb)
    jo = np.zeros((nb, 2, nq))
    vo = np.zeros((nb, 2))
    om = np.zeros(nb)
    bo = np.zeros((nb, 2))
    jpx = np.zeros(nq)
    jpz = np.zeros(nq)
    M = np.zeros((nq, nq))
    rhs = np.zeros(nq)
    visc = slip * kn * sw

    for bi in range(B):
        for _ in range(nsub):
            # Forward chain.
            if floating:
                o[0, 0] = q[bi, 0]
                o[0, 1] = q[bi, 1]
                a[0] = q[bi, 2]
                for k in range(nq):
                    jo[0, 0, k] = 0.0
                    jo[0, 1, k] = 0.0
                jo[0, 0, 0] = 1.0
                jo[0, 1, 1] = 1.0
                vo[0, 0] = v[bi, 0]
                vo[0, 1] = v[bi, 1]
                om[0] = v[bi, 2]
                bo[0, 0] = 0.0
                bo[0, 1] = 0.0
            for j in range(nj):
                c = base + j
                p = jparent[j]
                dof = jdof[j]
                qj = q[bi, dof]
                vj = v[bi, dof]
                if p >= 0:
                    opx, opz, ap = o[p, 0], o[p, 1], a[p]
                    vopx, vopz, omp = vo[p, 0], vo[p, 1], om[p]
                    bopx, bopz = bo[p, 0], bo[p, 1]
                else:
                    opx = opz = ap = 0.0
                    vopx = vopz = omp = 0.0
                    bopx = bopz = 0.0
                ca = np.cos(ap)
                sa = np.sin(ap)
                if jkind[j] == 0:  # revolute
                    ax_, az_ = janchor[j, 0], janchor[j, 1]
                    rx = ca * ax_ - sa * az_
                    rz = sa * ax_ + ca * az_
                    rpx = -sa * ax_ - ca * az_
                    rpz = ca * ax_ - sa * az_
                    a[c] = ap + jref[j] + qj
                    o[c, 0] = opx + rx
                    o[c, 1] = opz + rz
                    for k in range(nq):
                        japk = ja[p, k] if p >= 0 else 0.0
                        jopx = jo[p, 0, k] if p >= 0 else 0.0
                        jopz = jo[p, 1, k] if p >= 0 else 0.0
                        jo[c, 0, k] = jopx + rpx * japk
                        jo[c, 1, k] = jopz + rpz * japk
                    vo[c, 0] = vopx + omp * rpx
                    vo[c, 1] = vopz + omp * rpz
                    om[c] = omp + vj
                    bo[c, 0] = bopx - omp * omp * rx
                    bo[c, 1] = bopz - omp * omp * rz
                else:  # prismatic
                    dx_, dz_ = jaxis[j, 0], jaxis[j, 1]
                    wx = janchor[j, 0] + qj * dx_
                    wz = janchor[j, 1] + qj * dz_
                    rwx = ca * wx - sa * wz
                    rwz = sa * wx + ca * wz
                    rpwx = -sa * wx - ca * wz
                    rpwz = ca * wx - sa * wz
                    rdx = ca * dx_ - sa * dz_
                    rdz = sa * dx_ + ca * dz_
                    rpdx = -sa * dx_ - ca * dz_
                    rpdz = ca * dx_ - sa * dz_
                    a[c] = ap + jref[j]
                    o[c, 0] = opx + rwx
                    o[c, 1] = opz + rwz
                    for k in range(nq):
                        japk = ja[p, k] if p >= 0 else 0.0
                        jopx = jo[p, 0, k] if p >= 0 else 0.0
                        jopz = jo[p, 1, k] if p >= 0 else 0.0
                        jo[c, 0, k] = jopx + rpwx * japk
                        jo[c, 1, k] = jopz + rpwz * japk
                    jo[c, 0, dof] += rdx
                    jo[c, 1, dof] += rdz
                    vo[c, 0] = vopx + omp * rpwx + vj * rdx
                    vo[c, 1] = vopz + omp * rpwz + vj * rdz
                    om[c] = omp
                    bo[c, 0] = bopx - omp * omp * rwx + 2.0 * omp * vj * rpdx
                    bo[c, 1] = bopz - omp * omp * rwz + 2.0 * omp * vj * rpdz

            # Mass matrix and passive forces.
            for k in range(nq):
                rhs[k] = 0.0
                for l in range(nq):
                    M[k, l] = 0.0
            for b in range(nb):
                ca = np.cos(a[b])
                sa = np.sin(a[b])
                cx, cz = lcom[b, 0], lcom[b, 1]
                rx = ca * cx - sa * cz
                rz = sa * cx + ca * cz
                rpx = -sa * cx - ca * cz
                rpz = ca * cx - sa * cz
                m = lmass[b]
                inert = linertia[b]
                biasx = bo[b, 0] - om[b] * om[b] * rx
                biasz = bo[b, 1] - om[b] * om[b] * rz
                for k in range(nq):
                    jpx[k] = jo[b, 0, k] + rpx * ja[b, k]
                    jpz[k] = jo[b, 1, k] + rpz * ja[b, k]
                for k in range(nq):
                    rhs[k] -= m * (gravity * jpz[k] + jpx[k] * biasx
                                   + jpz[k] * biasz)
                    for l in range(k, nq):
                        M[k, l] += m * (jpx[k] * jpx[l] + jpz[k] * jpz[l]) \
                            + inert * ja[b, k] * ja[b, l]
            for k in range(nq):
                for l in range(k):
                    M[k, l] = M[l, k]

            # Joint damping and clamped PD torques.
            for j in range(nj):
                dof = jdof[j]
                rhs[dof] -= jdamp[j] * v[bi, dof]
                ui = juidx[j]
                if ui >= 0:
                    raw = jkp[j] * (U[bi, ui] - q[bi, dof]) - jkd[j] * v[bi, dof]
                    if raw > jtlim[j]:
                        raw = jtlim[j]
                    elif raw < -jtlim[j]:
                        raw = -jtlim[j]
                    rhs[dof] += raw

            # Ground contact.
            for ci in range(nc):
                b = cbody[ci]
                ca = np.cos(a[b])
                sa = np.sin(a[b])
                ox, oz = coffset[ci, 0], coffset[ci, 1]
                rx = ca * ox - sa * oz
                rz = sa * ox + ca * oz
                rpx = -sa * ox - ca * oz
                rpz = ca * ox - sa * oz
                pz = o[b, 1] + rz
                vpx = vo[b, 0] + om[b] * rpx
                vpz = vo[b, 1] + om[b] * rpz
                if pz >= sw:
                    d = 0.0
                elif pz <= -sw:
                    d = -pz
                else:
                    d = (sw - pz) * (sw - pz) / (4.0 * sw)
                act = np.tanh(d / sw)
                N = kn * d - cn * vpz * act
                if N < 0.0:
                    N = 0.0
                speed = np.sqrt(vpx * vpx + REG_SLIP_VEL_SQ)
                cone = mu * N / speed
                denom = visc + cone
                coeff = visc * cone / denom if denom > 0.0 else 0.0
                ft = -coeff * vpx
                for k in range(nq):
                    rhs[k] += (jo[b, 0, k] + rpx * ja[b, k]) * ft \
                        + (jo[b, 1, k] + rpz * ja[b, k]) * N

            accel = np.linalg.solve(M, rhs)
            ok = True
            for k in range(nq):
                if not np.isfinite(accel[k]):
                    ok = False
            if not ok:
                return 1
            for k in range(nq):
                v[bi, k] += h * accel[k]
                q[bi, k] += h * v[bi, k]
    return 0
