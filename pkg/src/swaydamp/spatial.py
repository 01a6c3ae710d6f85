"""Spatial (3D) model of the suspended chain with platform yaw.

Each passive joint carries two elevation angles: ``phiXx`` tilts the
link toward the parent's +x axis (a rotation about -y) and ``phiXy``
tilts it toward +y (a rotation about +x), so the link direction is

    e(phix, phiy) = (sin phix cos phiy, sin phiy, -cos phix cos phiy).

Joint 2 angles are measured in the link-1 frame, mirroring the planar
convention where ``q2`` is relative to the cable.  The platform adds a
yaw angle ``psi`` about its body z axis with rotor inertia ``jz``; the
point masses store no yaw energy, so the yaw block of the mass matrix
is the constant ``jz``.  Restricting motion to the y-z plane
(``phi1y = q1``, ``phi2y = q2``, x/yaw components zero) reproduces the
planar model exactly, including the sign conventions of the body twist.

All kernel functions broadcast over leading batch dimensions, which is
what makes the stability-grid sweep affordable: the whole grid advances
as one vectorized RK4 batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    BodyTwist,
    BodyWrench,
    PendulumParams,
    PlanarState,
    SingularConfigurationError,
)

__all__ = [
    "SpatialState",
    "spatial_dynamics",
    "spatial_mass_matrix",
    "spatial_coriolis_vector",
    "spatial_gravity_vector",
    "body_jacobian",
    "spatial_twist",
    "spatial_energy",
    "spatial_positions",
    "spatial_state_from_planar",
    "spatial_wrench_from_planar",
    "SINGULARITY_MARGIN",
]

#: Elevation angles must stay below pi/2 minus this margin.
SINGULARITY_MARGIN = 1e-6

_ZDOWN = np.array([0.0, 0.0, -1.0])


@dataclass
class SpatialState:
    """Joint angles/rates of the spatial chain (radians, rad/s)."""

    phi1x: float = 0.0
    phi1y: float = 0.0
    phi2x: float = 0.0
    phi2y: float = 0.0
    psi: float = 0.0
    phi1xdot: float = 0.0
    phi1ydot: float = 0.0
    phi2xdot: float = 0.0
    phi2ydot: float = 0.0
    psidot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1x, self.phi1y, self.phi2x, self.phi2y, self.psi,
                         self.phi1xdot, self.phi1ydot, self.phi2xdot, self.phi2ydot,
                         self.psidot])

    @classmethod
    def from_array(cls, x) -> "SpatialState":
        return cls(*(float(v) for v in x))


def spatial_state_from_planar(state: PlanarState) -> SpatialState:
    """Embed a planar state into the y-z plane of the spatial model."""
    return SpatialState(phi1y=state.q1, phi2y=state.q2,
                        phi1ydot=state.q1dot, phi2ydot=state.q2dot)


def spatial_wrench_from_planar(wrench: BodyWrench) -> BodyWrench:
    """Planar F acts along body y, planar T about body x."""
    return BodyWrench(F=np.array([0.0, float(wrench.F), 0.0]),
                      T=np.array([float(wrench.T), 0.0, 0.0]))


def _tilt_mats(a, b):
    """Rotation factors A = R(-y, a), B = R(x, b) and their derivatives.

    Returns six (..., 3, 3) arrays: A, A', A'', B, B', B''.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast(a, b).shape
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    one = np.ones(shape)

    def mat(rows):
        out = np.zeros(shape + (3, 3))
        for (i, j), v in rows.items():
            out[..., i, j] = v
        return out

    A = mat({(0, 0): ca, (0, 2): -sa, (1, 1): one, (2, 0): sa, (2, 2): ca})
    Ap = mat({(0, 0): -sa, (0, 2): -ca, (2, 0): ca, (2, 2): -sa})
    App = mat({(0, 0): -ca, (0, 2): sa, (2, 0): -sa, (2, 2): -ca})
    B = mat({(0, 0): one, (1, 1): cb, (1, 2): -sb, (2, 1): sb, (2, 2): cb})
    Bp = mat({(1, 1): -sb, (1, 2): -cb, (2, 1): cb, (2, 2): -sb})
    Bpp = mat({(1, 1): -cb, (1, 2): sb, (2, 1): -sb, (2, 2): -cb})
    return A, Ap, App, B, Bp, Bpp


def _chain_terms(q, qd, l1, l2):
    """Kinematic quantities shared by the mass matrix, bias and Jacobians.

    ``q``/``qd`` have shape (..., 5); scalar or (...,) link lengths.
    Returns a dict of batched arrays.
    """
    A1, A1p, A1pp, B1, B1p, B1pp = _tilt_mats(q[..., 0], q[..., 1])
    A2, A2p, A2pp, B2, B2p, B2pp = _tilt_mats(q[..., 2], q[..., 3])
    l1 = np.asarray(l1, dtype=float)[..., None]
    l2 = np.asarray(l2, dtype=float)[..., None]

    R1 = A1 @ B1
    Q2 = A2 @ B2
    R2 = R1 @ Q2

    dR1 = (A1p @ B1, A1 @ B1p)                      # d R1 / d phi1x, phi1y
    dR2 = (dR1[0] @ Q2, dR1[1] @ Q2, R1 @ (A2p @ B2), R1 @ (A2 @ B2p))

    z = _ZDOWN
    c10 = l1 * (dR1[0] @ z)
    c11 = l1 * (dR1[1] @ z)
    zero = np.zeros_like(c10)
    J1 = np.stack([c10, c11, zero, zero, zero], axis=-1)
    J2 = np.stack([c10 + l2 * (dR2[0] @ z), c11 + l2 * (dR2[1] @ z),
                   l2 * (dR2[2] @ z), l2 * (dR2[3] @ z), zero], axis=-1)

    # Velocity-product ("centripetal") accelerations: pdd with qdd frozen at 0.
    a1d, b1d = qd[..., 0, None, None], qd[..., 1, None, None]
    a2d, b2d = qd[..., 2, None, None], qd[..., 3, None, None]
    R1dot = dR1[0] * a1d + dR1[1] * b1d
    Q2dot = (A2p @ B2) * a2d + (A2 @ B2p) * b2d
    R1dd = (A1pp @ B1) * a1d ** 2 + 2.0 * (A1p @ B1p) * a1d * b1d + (A1 @ B1pp) * b1d ** 2
    Q2dd = (A2pp @ B2) * a2d ** 2 + 2.0 * (A2p @ B2p) * a2d * b2d + (A2 @ B2pp) * b2d ** 2
    R2dd = R1dd @ Q2 + 2.0 * (R1dot @ Q2dot) + R1 @ Q2dd
    gamma1 = l1 * (R1dd @ z)
    gamma2 = gamma1 + l2 * (R2dd @ z)

    return {"R1": R1, "R2": R2, "dR2": dR2, "J1": J1, "J2": J2,
            "gamma1": gamma1, "gamma2": gamma2, "l1": l1, "l2": l2}


def _check_elevation(q):
    lim = math.pi / 2.0 - SINGULARITY_MARGIN
    if np.any(np.abs(q[..., :4]) >= lim):
        worst = float(np.max(np.abs(q[..., :4])))
        raise SingularConfigurationError(
            f"elevation angle {worst:.4f} rad at the gimbal singularity (pi/2)")


def _mass_bias_raw(q, qd, m1, m2, l1, l2, g, jz, terms=None):
    t = terms or _chain_terms(q, qd, l1, l2)
    J1, J2 = t["J1"], t["J2"]
    M = (m1 * np.einsum("...ki,...kj->...ij", J1, J1)
         + m2 * np.einsum("...ki,...kj->...ij", J2, J2))
    M[..., 4, 4] += jz
    h = (m1 * np.einsum("...ki,...k->...i", J1, t["gamma1"])
         + m2 * np.einsum("...ki,...k->...i", J2, t["gamma2"]))
    grav = g * (m1 * J1[..., 2, :] + m2 * J2[..., 2, :])
    return M, h, grav, t


def _body_jacobian_raw(q, t):
    """6x5 map from joint rates to the platform body twist (v_b, w_b)."""
    R2, dR2 = t["R2"], t["dR2"]
    psi = q[..., 4]
    cp, sp = np.cos(psi), np.sin(psi)
    shape = psi.shape
    Rz = np.zeros(shape + (3, 3))
    Rz[..., 0, 0] = cp
    Rz[..., 0, 1] = -sp
    Rz[..., 1, 0] = sp
    Rz[..., 1, 1] = cp
    Rz[..., 2, 2] = 1.0
    Rb = R2 @ Rz

    Jv = np.einsum("...ki,...kj->...ij", Rb, t["J2"])

    wcols = []
    for dR in dR2:
        S = np.einsum("...ik,...jk->...ij", dR, R2)  # dR @ R2^T, a skew matrix
        w = np.stack([0.5 * (S[..., 2, 1] - S[..., 1, 2]),
                      0.5 * (S[..., 0, 2] - S[..., 2, 0]),
                      0.5 * (S[..., 1, 0] - S[..., 0, 1])], axis=-1)
        wcols.append(np.einsum("...ki,...k->...i", Rb, w))
    zcol = np.zeros(shape + (3,))
    zcol[..., 2] = 1.0
    Jw = np.stack(wcols + [zcol], axis=-1)
    return np.concatenate([Jv, Jw], axis=-2)


def _accel_raw(q, qd, u, m1, m2, l1, l2, g, d1, d2, jz):
    """Batched joint accelerations; ``u`` is the 6-dim body wrench (F, T)."""
    M, h, grav, t = _mass_bias_raw(q, qd, m1, m2, l1, l2, g, jz)
    Jb = _body_jacobian_raw(q, t)
    damp = np.stack([d1 * qd[..., 0], d1 * qd[..., 1],
                     d2 * qd[..., 2], d2 * qd[..., 3],
                     np.zeros_like(qd[..., 4])], axis=-1)
    rhs = np.einsum("...ki,...k->...i", Jb, u) - h - grav - damp
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def _split(state: SpatialState):
    x = state.as_array()
    return x[:5], x[5:]


def spatial_mass_matrix(state: SpatialState, params: PendulumParams) -> np.ndarray:
    q, qd = _split(state)
    M, _, _, _ = _mass_bias_raw(q, qd, params.m1, params.m2, params.l1, params.l2,
                                params.g, params.jz)
    return M


def spatial_coriolis_vector(state: SpatialState, params: PendulumParams) -> np.ndarray:
    q, qd = _split(state)
    _, h, _, _ = _mass_bias_raw(q, qd, params.m1, params.m2, params.l1, params.l2,
                                params.g, params.jz)
    return h


def spatial_gravity_vector(state: SpatialState, params: PendulumParams) -> np.ndarray:
    q, qd = _split(state)
    _, _, grav, _ = _mass_bias_raw(q, qd, params.m1, params.m2, params.l1, params.l2,
                                   params.g, params.jz)
    return grav


def body_jacobian(state: SpatialState, params: PendulumParams) -> np.ndarray:
    q, qd = _split(state)
    t = _chain_terms(q, qd, params.l1, params.l2)
    return _body_jacobian_raw(q, t)


def spatial_twist(state: SpatialState, params: PendulumParams) -> BodyTwist:
    x = state.as_array()
    Jb = body_jacobian(state, params)
    tw = Jb @ x[5:]
    return BodyTwist(vb=tw[:3], wb=tw[3:])


def spatial_dynamics(state: SpatialState, wrench: BodyWrench, params: PendulumParams) -> np.ndarray:
    """Joint accelerations under a platform body wrench (F, T 3-vectors)."""
    q, qd = _split(state)
    _check_elevation(q)
    u = wrench.as_array()
    if u.shape != (6,):
        raise ValueError("spatial wrench needs 3-vector force and torque")
    return _accel_raw(q, qd, u, params.m1, params.m2, params.l1, params.l2,
                      params.g, params.d1, params.d2, params.jz)


def spatial_positions(state: SpatialState, params: PendulumParams):
    """World positions of the hook and the platform."""
    q, qd = _split(state)
    t = _chain_terms(q, qd, params.l1, params.l2)
    p1 = params.l1 * (t["R1"] @ _ZDOWN)
    p2 = p1 + params.l2 * (t["R2"] @ _ZDOWN)
    return p1, p2


def spatial_energy(state: SpatialState, params: PendulumParams) -> float:
    """Mechanical energy relative to the hanging equilibrium."""
    q, qd = _split(state)
    e = _energy_raw(q, qd, params.m1, params.m2, params.l1, params.l2,
                    params.g, params.jz)
    return float(e)


def _energy_raw(q, qd, m1, m2, l1, l2, g, jz):
    t = _chain_terms(q, qd, l1, l2)
    p1dot = np.einsum("...ij,...j->...i", t["J1"], qd)
    p2dot = np.einsum("...ij,...j->...i", t["J2"], qd)
    kin = 0.5 * (m1 * np.sum(p1dot ** 2, axis=-1) + m2 * np.sum(p2dot ** 2, axis=-1)
                 + jz * qd[..., 4] ** 2)
    p1z = l1 * (t["R1"] @ _ZDOWN)[..., 2]
    p2z = p1z + l2 * (t["R2"] @ _ZDOWN)[..., 2]
    pot = g * (m1 * (p1z + l1) + m2 * (p2z + l1 + l2))
    return kin + pot
