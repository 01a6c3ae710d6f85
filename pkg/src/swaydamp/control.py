"""Damping controllers for the suspended platform.

The platform can only sense its own motion (rate gyro), so the ideal
velocity-damping law ``F = -Kv*vb, T = -Kw*wb`` is approximated from
angular rate alone: hook-induced platform velocity is recovered by
low-pass filtering the pitch rate, exploiting the frequency separation
of the two pendulum modes,

    F = -Kv * (l1 * wb_lp + l2 * wb),     T = -Kw * wb,

with the filter cutoff halfway between the slow and fast mode
frequencies.  In 3D the same law acts per horizontal axis with the
cross-product sign pairing of rates and translations, plus a simple
yaw-rate damper ``Tz = -Kpsi * wz``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import BodyTwist, BodyWrench, PendulumParams, mode_frequencies

__all__ = [
    "DampingGains",
    "ImuSample",
    "LowPassFilter",
    "cutoff_frequency",
    "damping_wrench_planar",
    "damping_wrench_spatial",
    "ideal_wrench",
    "yaw_damper_torque",
    "FilteredDampingController",
    "IdealDampingController",
    "PassiveController",
]


@dataclass(frozen=True)
class DampingGains:
    """Velocity/rate damping gains; defaults are the field-tested values."""

    kv: float = 48.0
    kw: float = 70.0
    kpsi: float = 20.0

    def __post_init__(self):
        if self.kv <= 0.0 or self.kw <= 0.0:
            raise ValueError("damping gains kv, kw must be positive")
        if self.kpsi < 0.0:
            raise ValueError("yaw gain must be non-negative")


@dataclass
class ImuSample:
    """Strapdown rate-gyro sample: scalar pitch rate or 3-vector body rates."""

    wb: object
    theta: Optional[float] = None


def cutoff_frequency(params: PendulumParams) -> tuple[float, float]:
    """Filter cutoff halfway between the pendulum modes.

    Returns ``(nu_cutoff, tau)`` with ``tau = 1 / (2 pi nu_cutoff)``.
    """
    nu_slow, nu_fast = mode_frequencies(params)
    nu_c = 0.5 * (nu_slow + nu_fast)
    return nu_c, 1.0 / (2.0 * math.pi * nu_c)


class LowPassFilter:
    """First-order low pass with exact zero-order-hold discretization.

    ``y+ = alpha * y + (1 - alpha) * u`` with ``alpha = exp(-dt/tau)``.
    The state is seeded with the first sample to avoid a startup
    transient.  Works on scalars or vectors alike.
    """

    def __init__(self, tau: float):
        if tau <= 0.0:
            raise ValueError("filter time constant must be positive")
        self.tau = float(tau)
        self.state = None

    def reset(self) -> None:
        self.state = None

    def update(self, u, dt: float):
        if dt <= 0.0:
            raise ValueError("filter step must be positive")
        u = np.asarray(u, dtype=float)
        if self.state is None:
            self.state = u.copy()
        else:
            alpha = math.exp(-dt / self.tau)
            self.state = alpha * self.state + (1.0 - alpha) * u
        return self.state


def damping_wrench_planar(gains: DampingGains, wb: float, wb_lp: float,
                          params: PendulumParams) -> BodyWrench:
    """Rate-only damping wrench; uses only the geometry l1, l2."""
    F = -gains.kv * (params.l1 * wb_lp + params.l2 * wb)
    T = -gains.kw * wb
    return BodyWrench(F=float(F), T=float(T))


def damping_wrench_spatial(gains: DampingGains, wb, wb_lp,
                           params: PendulumParams) -> BodyWrench:
    """Componentwise 3D version of the planar law.

    A body rate about +x moves the platform toward +y and vice versa
    with a sign flip (v = w x r, r pointing down), so the force estimate
    swaps/signs the horizontal axes accordingly.  Yaw rate is damped by
    the separate ``kpsi`` gain.
    """
    wb = np.asarray(wb, dtype=float)
    wb_lp = np.asarray(wb_lp, dtype=float)
    est = params.l1 * wb_lp + params.l2 * wb
    F = np.array([gains.kv * est[1], -gains.kv * est[0], 0.0])
    T = np.array([-gains.kw * wb[0], -gains.kw * wb[1],
                  yaw_damper_torque(gains, wb[2])])
    return BodyWrench(F=F, T=T)


def yaw_damper_torque(gains: DampingGains, wz: float) -> float:
    return -gains.kpsi * float(wz)


def ideal_wrench(gains: DampingGains, twist: BodyTwist) -> BodyWrench:
    """Full velocity feedback ``F = -Kv vb, T = -Kw wb`` (needs vb)."""
    vb = np.asarray(twist.vb, dtype=float)
    wb = np.asarray(twist.wb, dtype=float)
    if vb.ndim == 0:
        return BodyWrench(F=float(-gains.kv * vb), T=float(-gains.kw * wb))
    return BodyWrench(F=-gains.kv * vb, T=-gains.kw * wb)


def _saturate(wrench: BodyWrench, saturation) -> BodyWrench:
    if saturation is None:
        return wrench
    fmax, tmax = saturation
    F = np.clip(wrench.F, -fmax, fmax)
    T = np.clip(wrench.T, -tmax, tmax)
    if np.ndim(wrench.F) == 0:
        return BodyWrench(F=float(F), T=float(T))
    return BodyWrench(F=F, T=T)


class FilteredDampingController:
    """Gyro-only damping controller (the deployable one).

    ``tau=None`` picks the mode-midpoint cutoff for the given
    parameters; pass a number to override (e.g. a hardware-identified
    cutoff).  ``saturation=(fmax, tmax)`` clips the command per axis.
    """

    def __init__(self, gains: DampingGains, params: PendulumParams,
                 tau: Optional[float] = None, saturation=None):
        self.gains = gains
        self.params = params
        self.tau = float(tau) if tau is not None else cutoff_frequency(params)[1]
        self.saturation = saturation
        self.filter = LowPassFilter(self.tau)

    def reset(self) -> None:
        self.filter.reset()

    @property
    def filter_state(self):
        return self.filter.state

    def update(self, t: float, imu: ImuSample, twist: BodyTwist, dt: float) -> BodyWrench:
        wb_lp = self.filter.update(imu.wb, dt)
        if np.ndim(imu.wb) == 0:
            w = damping_wrench_planar(self.gains, float(imu.wb), float(wb_lp), self.params)
        else:
            w = damping_wrench_spatial(self.gains, imu.wb, wb_lp, self.params)
        return _saturate(w, self.saturation)


class IdealDampingController:
    """Benchmark controller with full twist feedback (not deployable)."""

    def __init__(self, gains: DampingGains, saturation=None):
        self.gains = gains
        self.saturation = saturation
        self.filter_state = None

    def reset(self) -> None:
        pass

    def update(self, t: float, imu: ImuSample, twist: BodyTwist, dt: float) -> BodyWrench:
        return _saturate(ideal_wrench(self.gains, twist), self.saturation)


class PassiveController:
    """No actuation; the chain rings down on joint damping alone."""

    filter_state = None

    def reset(self) -> None:
        pass

    def update(self, t: float, imu: ImuSample, twist: BodyTwist, dt: float) -> BodyWrench:
        if np.ndim(imu.wb) == 0:
            return BodyWrench(F=0.0, T=0.0)
        return BodyWrench(F=np.zeros(3), T=np.zeros(3))
