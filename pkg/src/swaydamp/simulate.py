"""Fixed-step closed-loop simulation of the suspended chain.

Classic RK4 on the planar or spatial model with the controller running
at its own (lower) rate under zero-order hold.  Disturbances are
additive platform wrenches evaluated continuously in time; gyro noise
is drawn per controller sample from a seeded generator so every run is
bit-reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .control import ImuSample
from .dynamics import (
    BodyTwist,
    BodyWrench,
    PendulumParams,
    PlanarState,
    planar_dynamics,
    planar_energy,
    planar_twist,
)
from .spatial import (
    SpatialState,
    spatial_dynamics,
    spatial_energy,
    spatial_twist,
)

__all__ = [
    "DisturbanceEvent",
    "DisturbanceSchedule",
    "GyroNoise",
    "Trajectory",
    "simulate",
    "PLANAR_CSV_COLUMNS",
]

PLANAR_CSV_COLUMNS = ["t", "q1", "q2", "q1dot", "q2dot", "theta",
                      "wb", "wb_lp", "vb", "F", "T", "energy"]

SPATIAL_CSV_COLUMNS = ["t", "phi1x", "phi1y", "phi2x", "phi2y", "psi",
                       "phi1xdot", "phi1ydot", "phi2xdot", "phi2ydot", "psidot",
                       "vbx", "vby", "vbz", "wbx", "wby", "wbz",
                       "wlpx", "wlpy", "wlpz",
                       "Fx", "Fy", "Fz", "Tx", "Ty", "Tz", "energy"]


@dataclass(frozen=True)
class DisturbanceEvent:
    """One additive wrench event on the platform.

    ``kind`` is one of ``impulse`` (rectangular pulse), ``step``,
    ``sinusoid`` or ``jerk_train`` (a burst of alternating-sign pulses,
    the shape a robot arm slewing on deck produces).  ``force`` and
    ``torque`` are scalars for the planar model or 3-vectors for the
    spatial one.
    """

    kind: str
    start: float
    force: object = 0.0
    torque: object = 0.0
    duration: float = 0.0
    frequency: float = 0.0
    count: int = 1
    period: float = 0.0

    def evaluate(self, t: float) -> tuple:
        F = np.asarray(self.force, dtype=float)
        T = np.asarray(self.torque, dtype=float)
        zero = (np.zeros_like(F), np.zeros_like(T))
        rel = t - self.start
        if rel < 0.0:
            return zero
        if self.kind == "impulse":
            return (F, T) if rel < self.duration else zero
        if self.kind == "step":
            return (F, T)
        if self.kind == "sinusoid":
            if rel >= self.duration:
                return zero
            s = math.sin(2.0 * math.pi * self.frequency * rel)
            return (F * s, T * s)
        if self.kind == "jerk_train":
            period = self.period if self.period > 0.0 else 2.0 * self.duration
            k = int(rel // period)
            if k >= self.count or (rel - k * period) >= self.duration:
                return zero
            sign = 1.0 if k % 2 == 0 else -1.0
            return (F * sign, T * sign)
        raise ValueError(f"unknown disturbance kind {self.kind!r}")


class DisturbanceSchedule:
    """Sum of timed wrench events; callable as ``schedule(t) -> (F, T)``."""

    def __init__(self, events: Sequence[DisturbanceEvent] = ()):
        self.events = list(events)

    def __call__(self, t: float):
        F = None
        T = None
        for ev in self.events:
            f, tq = ev.evaluate(t)
            F = f if F is None else F + f
            T = tq if T is None else T + tq
        return F, T

    def __bool__(self):
        return bool(self.events)


@dataclass(frozen=True)
class GyroNoise:
    """White rate-gyro noise with the usual density spec (deg/s/sqrt(Hz))."""

    density_deg: float = 0.009
    enabled: bool = False

    def std_per_sample(self, sample_rate: float) -> float:
        return math.radians(self.density_deg) * math.sqrt(sample_rate)


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop run, one row per integrator step."""

    model: str
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    vb: np.ndarray
    wb: np.ndarray
    wb_lp: np.ndarray
    F: np.ndarray
    T: np.ndarray
    energy: np.ndarray
    params: PendulumParams
    meta: dict = field(default_factory=dict)

    @property
    def columns(self):
        return PLANAR_CSV_COLUMNS if self.model == "planar" else SPATIAL_CSV_COLUMNS

    def as_table(self) -> np.ndarray:
        if self.model == "planar":
            theta = self.q[:, 0] + self.q[:, 1]
            cols = [self.t, self.q[:, 0], self.q[:, 1], self.qd[:, 0], self.qd[:, 1],
                    theta, self.wb, self.wb_lp, self.vb, self.F, self.T, self.energy]
        else:
            cols = ([self.t] + [self.q[:, i] for i in range(5)]
                    + [self.qd[:, i] for i in range(5)]
                    + [self.vb[:, i] for i in range(3)]
                    + [self.wb[:, i] for i in range(3)]
                    + [self.wb_lp[:, i] for i in range(3)]
                    + [self.F[:, i] for i in range(3)]
                    + [self.T[:, i] for i in range(3)]
                    + [self.energy])
        return np.column_stack(cols)

    def to_csv(self, path) -> None:
        write_csv(path, self.columns, self.as_table())


def write_csv(path, columns, table) -> None:
    """CSV with round-trip float formatting; byte-stable across runs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in np.asarray(table):
            writer.writerow([repr(float(v)) for v in row])


def _read_state(x0):
    if isinstance(x0, PlanarState):
        return "planar", x0.as_array()
    if isinstance(x0, SpatialState):
        return "spatial", x0.as_array()
    raise TypeError("initial state must be PlanarState or SpatialState")


def simulate(params: PendulumParams, x0, controller, *, duration: float,
             dt: float = 1e-3, control_rate: float = 200.0,
             disturbance: Optional[DisturbanceSchedule] = None,
             noise: Optional[GyroNoise] = None, seed: int = 0) -> Trajectory:
    """Integrate the closed loop and record every step.

    The controller is sampled every ``round(1/(control_rate*dt))``
    steps and held in between (zero-order hold).  Raises if the state
    leaves the model's validity region or goes non-finite.
    """
    model, x = _read_state(x0)
    if duration <= 0.0 or dt <= 0.0:
        raise ValueError("duration and dt must be positive")
    n_steps = int(round(duration / dt))
    ctrl_every = max(1, int(round(1.0 / (control_rate * dt))))
    ctrl_dt = ctrl_every * dt

    planar = model == "planar"
    dim_u = 1 if planar else 3
    rng = np.random.default_rng(seed)
    noise_std = 0.0
    if noise is not None and noise.enabled:
        noise_std = noise.std_per_sample(1.0 / ctrl_dt)

    if planar:
        def deriv(t, x, uF, uT):
            st = PlanarState(*x)
            qdd = planar_dynamics(st, BodyWrench(F=uF, T=uT), params)
            return np.array([x[2], x[3], qdd[0], qdd[1]])

        def read_twist(x):
            tw = planar_twist(PlanarState(*x), params)
            return tw.vb, tw.wb

        energy_of = lambda x: planar_energy(PlanarState(*x), params)
    else:
        def deriv(t, x, uF, uT):
            st = SpatialState(*x)
            qdd = spatial_dynamics(st, BodyWrench(F=uF, T=uT), params)
            return np.concatenate([x[5:], qdd])

        def read_twist(x):
            tw = spatial_twist(SpatialState(*x), params)
            return tw.vb, tw.wb

        energy_of = lambda x: spatial_energy(SpatialState(*x), params)

    nq = 2 if planar else 5
    rec = {name: np.zeros((n_steps + 1,) + shape) for name, shape in {
        "t": (), "q": (nq,), "qd": (nq,),
        "vb": () if planar else (3,), "wb": () if planar else (3,),
        "wb_lp": () if planar else (3,),
        "F": () if planar else (3,), "T": () if planar else (3,),
        "energy": ()}.items()}

    controller.reset()
    uF = 0.0 if planar else np.zeros(3)
    uT = 0.0 if planar else np.zeros(3)

    def dist_at(t):
        if disturbance:
            dF, dT = disturbance(t)
            return uF + dF, uT + dT
        return uF, uT

    for k in range(n_steps + 1):
        t = k * dt
        vb, wb = read_twist(x)
        if k % ctrl_every == 0:
            wb_meas = wb
            if noise_std > 0.0:
                wb_meas = wb + noise_std * (rng.standard_normal() if planar
                                            else rng.standard_normal(3))
            theta = float(x[0] + x[1]) if planar else None
            wrench = controller.update(t, ImuSample(wb=wb_meas, theta=theta),
                                       BodyTwist(vb=vb, wb=wb), ctrl_dt)
            uF, uT = wrench.F, wrench.T
        aF, aT = dist_at(t)

        rec["t"][k] = t
        rec["q"][k] = x[:nq]
        rec["qd"][k] = x[nq:]
        rec["vb"][k] = vb
        rec["wb"][k] = wb
        fs = controller.filter_state
        rec["wb_lp"][k] = (0.0 if planar else np.zeros(3)) if fs is None else fs
        rec["F"][k] = aF
        rec["T"][k] = aT
        rec["energy"][k] = energy_of(x)

        if k == n_steps:
            break
        k1 = deriv(t, x, aF, aT)
        hF, hT = dist_at(t + 0.5 * dt)
        k2 = deriv(t + 0.5 * dt, x + 0.5 * dt * k1, hF, hT)
        k3 = deriv(t + 0.5 * dt, x + 0.5 * dt * k2, hF, hT)
        eF, eT = dist_at(t + dt)
        k4 = deriv(t + dt, x + dt * k3, eF, eT)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"state became non-finite at t={t + dt:.4f} s")

    return Trajectory(model=model, t=rec["t"], q=rec["q"], qd=rec["qd"],
                      vb=rec["vb"], wb=rec["wb"], wb_lp=rec["wb_lp"],
                      F=rec["F"], T=rec["T"], energy=rec["energy"],
                      params=params,
                      meta={"dt": dt, "control_rate": control_rate, "seed": seed})
