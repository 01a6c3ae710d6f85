"""Planar double-pendulum model of a platform hanging from a cable.

The hook (mass ``m1``) hangs from the crane tip on a cable of length
``l1``; the platform (mass ``m2``) hangs from the hook on a sling of
length ``l2``.  Both bodies are treated as point masses on massless
links with viscous damping in the two passive joints.  ``q1`` is the
cable angle from the vertical and ``q2`` the sling angle relative to
the cable, so ``theta = q1 + q2`` is the platform pitch.  A propulsion
wrench ``(F, T)`` acts on the platform along its body axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "PendulumParams",
    "PlanarState",
    "BodyTwist",
    "BodyWrench",
    "LinearModel",
    "DEFAULT_PARAMS",
    "planar_mass_matrix",
    "planar_coriolis",
    "planar_gravity",
    "planar_dynamics",
    "planar_jacobian",
    "planar_twist",
    "planar_rates_from_twist",
    "planar_energy",
    "mode_frequencies",
    "linearize",
    "SingularConfigurationError",
]


class SingularConfigurationError(RuntimeError):
    """Raised when a configuration reaches a kinematic singularity."""


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants of the suspended hook + platform chain.

    Lengths are metres, masses kilograms, damping N.m.s/rad and the
    platform yaw inertia ``jz`` kg.m^2 (used only by the spatial model).
    """

    m1: float
    m2: float
    l1: float
    l2: float
    g: float = 9.81
    d1: float = 0.5
    d2: float = 0.5
    jz: float = 5.0

    def __post_init__(self):
        for name in ("m1", "m2", "l1", "l2", "g", "jz"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("d1", "d2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def m12(self) -> float:
        return self.m1 + self.m2

    @property
    def l12(self) -> float:
        return self.l1 + self.l2

    def with_(self, **kwargs) -> "PendulumParams":
        return replace(self, **kwargs)


#: Nominal parameters of the 55 kg platform rig used throughout the tests.
DEFAULT_PARAMS = PendulumParams(m1=18.5, m2=55.0, l1=6.0, l2=2.2)


@dataclass
class PlanarState:
    """Configuration and rates of the planar chain (radians, rad/s)."""

    q1: float = 0.0
    q2: float = 0.0
    q1dot: float = 0.0
    q2dot: float = 0.0

    @property
    def theta(self) -> float:
        return self.q1 + self.q2

    @property
    def thetadot(self) -> float:
        return self.q1dot + self.q2dot

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q1dot, self.q2dot])

    @classmethod
    def from_array(cls, x) -> "PlanarState":
        return cls(*(float(v) for v in x))


@dataclass
class BodyTwist:
    """Platform body-frame velocity; scalars in the plane, 3-vectors in space."""

    vb: object = 0.0
    wb: object = 0.0


@dataclass
class BodyWrench:
    """Propulsion force/torque on the platform along its body axes."""

    F: object = 0.0
    T: object = 0.0

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(self.F), np.atleast_1d(self.T)]).astype(float)


def planar_mass_matrix(q2: float, params: PendulumParams) -> np.ndarray:
    m1, m2, l1, l2 = params.m1, params.m2, params.l1, params.l2
    c2 = math.cos(q2)
    m11 = (m1 + m2) * l1 ** 2 + m2 * l2 ** 2 + 2.0 * m2 * l1 * l2 * c2
    m12 = m2 * l2 ** 2 + m2 * l1 * l2 * c2
    return np.array([[m11, m12], [m12, m2 * l2 ** 2]])


def planar_coriolis(q2: float, q1dot: float, q2dot: float, params: PendulumParams) -> np.ndarray:
    """Coriolis matrix from the Christoffel symbols, so Mdot - 2C is skew."""
    h = params.m2 * params.l1 * params.l2 * math.sin(q2)
    return np.array([[-h * q2dot, -h * (q1dot + q2dot)], [h * q1dot, 0.0]])


def planar_gravity(q1: float, q2: float, params: PendulumParams) -> np.ndarray:
    s1 = math.sin(q1)
    st = math.sin(q1 + q2)
    g1 = params.m12 * params.g * params.l1 * s1 + params.m2 * params.g * params.l2 * st
    g2 = params.m2 * params.g * params.l2 * st
    return np.array([g1, g2])


def planar_jacobian(q2: float, params: PendulumParams) -> np.ndarray:
    """Map joint rates to the platform body twist (vb, wb)."""
    l1, l2 = params.l1, params.l2
    return np.array([[l1 * math.cos(q2) + l2, l2], [1.0, 1.0]])


def planar_twist(state: PlanarState, params: PendulumParams) -> BodyTwist:
    J = planar_jacobian(state.q2, params)
    vb, wb = J @ np.array([state.q1dot, state.q2dot])
    return BodyTwist(vb=float(vb), wb=float(wb))


def planar_rates_from_twist(twist: BodyTwist, q2: float, params: PendulumParams,
                            margin: float = 1e-6) -> np.ndarray:
    """Invert the twist map; refuses near the fold at ``|q2| = pi/2``."""
    if abs(q2) >= math.pi / 2.0 - margin:
        raise SingularConfigurationError(
            f"twist map singular at q2={q2:.4f} rad (det = l1*cos q2 -> 0)")
    J = planar_jacobian(q2, params)
    return np.linalg.solve(J, np.array([twist.vb, twist.wb]))


def planar_dynamics(state: PlanarState, wrench: BodyWrench, params: PendulumParams) -> np.ndarray:
    """Joint accelerations ``(q1ddot, q2ddot)`` under a platform wrench."""
    q1, q2, q1dot, q2dot = state.q1, state.q2, state.q1dot, state.q2dot
    M = planar_mass_matrix(q2, params)
    C = planar_coriolis(q2, q1dot, q2dot, params)
    gvec = planar_gravity(q1, q2, params)
    J = planar_jacobian(q2, params)
    qd = np.array([q1dot, q2dot])
    D = np.array([params.d1, params.d2])
    rhs = J.T @ np.array([float(wrench.F), float(wrench.T)]) - C @ qd - gvec - D * qd
    return np.linalg.solve(M, rhs)


def planar_energy(state: PlanarState, params: PendulumParams) -> float:
    """Kinetic plus potential energy, zero at the hanging equilibrium."""
    qd = np.array([state.q1dot, state.q2dot])
    kinetic = 0.5 * qd @ planar_mass_matrix(state.q2, params) @ qd
    potential = (params.m12 * params.g * params.l1 * (1.0 - math.cos(state.q1))
                 + params.m2 * params.g * params.l2 * (1.0 - math.cos(state.theta)))
    return float(kinetic + potential)


def mode_frequencies(params: PendulumParams) -> tuple[float, float]:
    """Frequencies (Hz) of the slow and fast pendulum modes, slow first.

    Closed form for the two natural frequencies of the linearized chain:

        nu^2 = g*m12 / (8 pi^2 m1 l1 l2) * (l12 -+ sqrt(l12^2 - 4 m1 l1 l2 / m12))
    """
    m1, l1, l2 = params.m1, params.l1, params.l2
    m12, l12 = params.m12, params.l12
    disc = l12 ** 2 - 4.0 * m1 * l1 * l2 / m12
    if disc < 0.0:  # cannot happen for positive masses/lengths, guard anyway
        raise ValueError("negative mode discriminant")
    pref = params.g * m12 / (8.0 * math.pi ** 2 * m1 * l1 * l2)
    root = math.sqrt(disc)
    nu_slow = math.sqrt(pref * (l12 - root))
    nu_fast = math.sqrt(pref * (l12 + root))
    return nu_slow, nu_fast


@dataclass
class LinearModel:
    """Linearized plant about hanging rest, in IMU-centric coordinates.

    State ``x = [q1, q1dot, theta, thetadot, thetadot_lp]`` where the
    last entry is the first-order low-pass filtered pitch rate with
    time constant ``tau``.  Input ``u = [F, T]``; output ``y = C x``
    approximates ``[vb, wb]`` as seen through the filter.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    tau: float
    params: PendulumParams = field(default=DEFAULT_PARAMS, repr=False)


def linearize(params: PendulumParams, tau: float) -> LinearModel:
    """Five-state linear model of chain + measurement filter.

    Joint damping is not part of the synthesis model (the controller
    must not rely on it), so ``A`` reflects the undamped chain.
    """
    if tau <= 0.0:
        raise ValueError("filter time constant must be positive")
    m1, m2, g = params.m1, params.m2, params.g
    l1, l2, m12 = params.l1, params.l2, params.m12
    A = np.zeros((5, 5))
    A[0, 1] = 1.0
    A[1, 0] = -g * m12 / (m1 * l1)
    A[1, 2] = m2 * g / (m1 * l1)
    A[2, 3] = 1.0
    A[3, 0] = g * m12 / (m1 * l2)
    A[3, 2] = -g * m12 / (m1 * l2)
    A[4, 3] = 1.0 / tau
    A[4, 4] = -1.0 / tau
    B = np.zeros((5, 2))
    B[1, 1] = -1.0 / (m1 * l1 * l2)
    B[3, 0] = 1.0 / (m2 * l2)
    B[3, 1] = m12 / (m1 * m2 * l2 ** 2)
    C = np.array([[0.0, 0.0, 0.0, l2, l1], [0.0, 0.0, 0.0, 1.0, 0.0]])
    return LinearModel(A=A, B=B, C=C, tau=tau, params=params)
