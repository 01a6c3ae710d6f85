"""Experiment harness: spectra, settling metrics, stability grid, comparisons.

Everything here consumes the simulation and synthesis layers and
produces plain tables (numpy arrays + pinned CSV column orders) so the
CLI can dump results that plot directly.  The stability grid runs all
of its cells as one batched vectorised integration — the grid is the
most expensive artifact and a cell-by-cell Python loop would be an
order of magnitude slower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.signal
from scipy.integrate import trapezoid

from .control import DampingGains, cutoff_frequency
from .dynamics import PendulumParams
from .simulate import Trajectory, simulate, write_csv
from .spatial import (
    SINGULARITY_MARGIN,
    _accel_raw,
    _body_jacobian_raw,
    _chain_terms,
    _energy_raw,
)
from .synthesis import LqrWeights

__all__ = [
    "Spectrum",
    "power_spectrum",
    "settling_time",
    "settling_time_from_samples",
    "trajectory_cost",
    "input_energy",
    "GridSpec",
    "GridCell",
    "StabilityGridReport",
    "stability_grid",
    "ComparisonBundle",
    "compare_controllers",
    "SamplingError",
    "SPECTRUM_CSV_COLUMNS",
    "GRID_CSV_COLUMNS",
]

SPECTRUM_CSV_COLUMNS = ["freq_hz", "power"]
GRID_CSV_COLUMNS = ["l1", "angle_deg", "rate", "converged", "settling_s",
                    "peak_force", "peak_torque"]


class SamplingError(ValueError):
    """Raised when a signal is not uniformly sampled."""


# ---------------------------------------------------------------------------
# Spectral analysis.
# ---------------------------------------------------------------------------

@dataclass
class Spectrum:
    """One-sided power spectrum with detected peaks (strongest first)."""

    frequencies: np.ndarray
    power: np.ndarray
    peaks: list  # (frequency [Hz], power) tuples sorted by power, descending

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def as_table(self) -> np.ndarray:
        return np.column_stack([self.frequencies, self.power])

    def to_csv(self, path) -> None:
        write_csv(path, SPECTRUM_CSV_COLUMNS, self.as_table())


def power_spectrum(samples, sample_rate: float, t=None,
                   peak_threshold: float = 0.1,
                   peak_separation: int = 2) -> Spectrum:
    """Periodogram of a detrended, Hann-windowed signal plus peak list.

    Peaks are local maxima above ``peak_threshold`` times the maximum
    power, at least ``peak_separation`` bins apart.  Pass the sample
    times as ``t`` to have uniformity checked (non-uniform records
    raise `SamplingError`).
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D signal with at least 2 samples")
    if sample_rate <= 0.0:
        raise ValueError("sample rate must be positive")
    if t is not None:
        steps = np.diff(np.asarray(t, dtype=float))
        if steps.size == 0 or np.any(
                np.abs(steps - 1.0 / sample_rate) > 1e-9 / sample_rate):
            raise SamplingError("samples are not uniform at the stated rate")

    freqs, power = scipy.signal.periodogram(
        x, fs=sample_rate, window="hann", detrend="constant")

    peaks: list = []
    top = float(np.max(power))
    if top > 0.0:
        idx, _ = scipy.signal.find_peaks(power, height=peak_threshold * top,
                                         distance=peak_separation)
        order = np.argsort(power[idx])[::-1]
        peaks = [(float(freqs[i]), float(power[i])) for i in idx[order]]
    return Spectrum(frequencies=freqs, power=power, peaks=peaks)


# ---------------------------------------------------------------------------
# Settling time.
# ---------------------------------------------------------------------------

def settling_time_from_samples(t, y, *, threshold: float = 0.05
                               ) -> Optional[float]:
    """First time after which |y| stays below threshold * peak|y|.

    Returns 0.0 for an identically zero signal and None when the signal
    is still outside the band at the final sample.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    t = np.asarray(t, dtype=float)
    mag = np.abs(np.asarray(y, dtype=float))
    peak = float(np.max(mag)) if mag.size else 0.0
    if peak == 0.0:
        return 0.0
    outside = mag >= threshold * peak
    if not outside.any():
        return 0.0
    last = int(np.flatnonzero(outside)[-1])
    if last == len(t) - 1:
        return None
    return float(t[last + 1])


def _select_signal(trajectory: Trajectory, signal) -> np.ndarray:
    if callable(signal):
        return np.asarray(signal(trajectory), dtype=float)
    cols = trajectory.columns
    if signal not in cols:
        raise ValueError(f"no column {signal!r} in a {trajectory.model} trajectory")
    return trajectory.as_table()[:, cols.index(signal)]


def settling_time(trajectory: Trajectory, signal="theta", *,
                  threshold: float = 0.05) -> Optional[float]:
    """Settling time of one trajectory signal (column name or callable)."""
    y = _select_signal(trajectory, signal)
    return settling_time_from_samples(trajectory.t, y, threshold=threshold)


# ---------------------------------------------------------------------------
# Quadratic trajectory cost.
# ---------------------------------------------------------------------------

def _linear_state_matrix(trajectory: Trajectory) -> np.ndarray:
    if trajectory.model != "planar":
        raise ValueError("quadratic cost is defined on the planar model's "
                         "linear coordinates")
    theta = trajectory.q[:, 0] + trajectory.q[:, 1]
    return np.column_stack([trajectory.q[:, 0], trajectory.qd[:, 0],
                            theta, trajectory.wb, trajectory.wb_lp])


def trajectory_cost(trajectory: Trajectory, weights: LqrWeights) -> float:
    """Trapezoidal integral of x'Qx + u'Ru along a planar run."""
    X = _linear_state_matrix(trajectory)
    U = np.column_stack([trajectory.F, trajectory.T])
    integrand = (np.einsum("ij,jk,ik->i", X, weights.Q, X)
                 + np.einsum("ij,jk,ik->i", U, weights.R, U))
    return float(trapezoid(integrand, trajectory.t))


def input_energy(trajectory: Trajectory, weights: LqrWeights) -> float:
    """The R-weighted share of the quadratic cost (actuation effort)."""
    U = np.column_stack([trajectory.F, trajectory.T])
    integrand = np.einsum("ij,jk,ik->i", U, weights.R, U)
    return float(trapezoid(integrand, trajectory.t))


# ---------------------------------------------------------------------------
# Stability grid.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Cartesian sweep of cable length and initial conditions.

    Defaults cover 4..10 m cables, tilt angles from 2 to 44 degrees in
    7-degree steps applied to every tilt axis of both links, and an
    initial swing rate of 0/0.5/1 rad/s on the crane-side joint about
    one horizontal axis (the kick a slewing crane gives the chain).
    Spreading the rate over more axes stores more kinetic energy than
    the lift-to-horizontal barrier at the grid corners, which no
    damping wrench can recover before the chain passes the chart
    singularity, so the excitation is deliberately concentrated.
    """

    l1_values: tuple = (4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
    angles_deg: tuple = (2.0, 9.0, 16.0, 23.0, 30.0, 37.0, 44.0)
    rates: tuple = (0.0, 0.5, 1.0)

    def __post_init__(self):
        if not (self.l1_values and self.angles_deg and len(self.rates)):
            raise ValueError("grid axes must be non-empty")

    @property
    def size(self) -> int:
        return len(self.l1_values) * len(self.angles_deg) * len(self.rates)

    def cells(self) -> np.ndarray:
        """(N, 3) array of (l1, angle_deg, rate), rate fastest-varying."""
        L, A, R = np.meshgrid(np.asarray(self.l1_values, float),
                              np.asarray(self.angles_deg, float),
                              np.asarray(self.rates, float), indexing="ij")
        return np.column_stack([L.ravel(), A.ravel(), R.ravel()])


@dataclass
class GridCell:
    l1: float
    angle_deg: float
    rate: float
    converged: bool
    settling_s: float  # nan when not settled
    peak_force: float
    peak_torque: float
    note: str = ""


@dataclass
class StabilityGridReport:
    spec: GridSpec
    cells: list
    energy_tol: float
    duration: float

    @property
    def all_converged(self) -> bool:
        return all(c.converged for c in self.cells)

    def as_table(self) -> np.ndarray:
        return np.array([[c.l1, c.angle_deg, c.rate, float(c.converged),
                          c.settling_s, c.peak_force, c.peak_torque]
                         for c in self.cells])

    def to_csv(self, path) -> None:
        write_csv(path, GRID_CSV_COLUMNS, self.as_table())


def stability_grid(params: PendulumParams, spec: Optional[GridSpec] = None,
                   gains: Optional[DampingGains] = None, *,
                   duration: float = 120.0, dt: float = 5e-3,
                   energy_tol: float = 1e-4,
                   tau: Union[str, float] = "auto") -> StabilityGridReport:
    """Closed-loop 3-D run for every grid cell, batched over the grid.

    A cell converges when its mechanical energy relative to hanging
    equilibrium drops below ``energy_tol`` (J) and stays there for the
    rest of the budget; the settling time is the first instant of that
    final quiet stretch.  The filter cutoff follows each cell's own
    cable length when ``tau`` is ``"auto"``.  Cells whose integration
    faults are reported as non-converged with a note.  Control runs at
    the integration step (zero-order hold in between is a no-op here).
    """
    spec = spec or GridSpec()
    gains = gains or DampingGains()
    grid = spec.cells()
    n = grid.shape[0]
    l1 = grid[:, 0]
    ang = np.radians(grid[:, 1])
    rate = grid[:, 2]

    if np.any(np.abs(ang) >= math.pi / 2.0 - SINGULARITY_MARGIN):
        raise ValueError("initial tilt angles must stay below 90 degrees")

    m1, m2, l2 = params.m1, params.m2, params.l2
    g, d1, d2, jz = params.g, params.d1, params.d2, params.jz

    if tau == "auto":
        taus = np.array([cutoff_frequency(params.with_(l1=float(v)))[1]
                         for v in l1])
    else:
        taus = np.full(n, float(tau))
        if np.any(taus <= 0.0):
            raise ValueError("tau must be positive")
    alpha = np.exp(-dt / taus)[:, None]

    q = np.zeros((n, 5))
    qd = np.zeros((n, 5))
    q[:, 0] = q[:, 1] = q[:, 2] = q[:, 3] = ang
    qd[:, 0] = rate

    n_steps = int(round(duration / dt))
    wlp = None
    u = np.zeros((n, 6))
    alive = np.ones(n, dtype=bool)
    notes = [""] * n
    peak_F = np.zeros(n)
    peak_T = np.zeros(n)
    # Track the last time each cell's energy was at/above tolerance.
    last_loud = np.zeros(n)
    ever_loud = np.zeros(n, dtype=bool)
    terminal_E = np.full(n, np.inf)

    for k in range(n_steps + 1):
        t = k * dt
        terms = _chain_terms(q, qd, l1, l2)
        Jb = _body_jacobian_raw(q, terms)
        twist = np.einsum("nij,nj->ni", Jb, qd)
        wb = twist[:, 3:]
        wlp = wb.copy() if wlp is None else alpha * wlp + (1.0 - alpha) * wb

        est = l1[:, None] * wlp + l2 * wb  # platform-velocity estimate terms
        u[:, 0] = gains.kv * est[:, 1]
        u[:, 1] = -gains.kv * est[:, 0]
        u[:, 2] = 0.0
        u[:, 3] = -gains.kw * wb[:, 0]
        u[:, 4] = -gains.kw * wb[:, 1]
        u[:, 5] = -gains.kpsi * wb[:, 2]
        u[~alive] = 0.0

        E = _energy_raw(q, qd, m1, m2, l1, l2, g, jz)
        loud = (E >= energy_tol) & alive
        last_loud[loud] = t
        ever_loud |= loud
        terminal_E = np.where(alive, E, terminal_E)
        peak_F = np.maximum(peak_F, np.linalg.norm(u[:, :3], axis=1))
        peak_T = np.maximum(peak_T, np.linalg.norm(u[:, 3:], axis=1))

        if k == n_steps:
            break
        k1 = _accel_raw(q, qd, u, m1, m2, l1, l2, g, d1, d2, jz)
        x1q, x1qd = q + 0.5 * dt * qd, qd + 0.5 * dt * k1
        k2 = _accel_raw(x1q, x1qd, u, m1, m2, l1, l2, g, d1, d2, jz)
        x2q, x2qd = q + 0.5 * dt * x1qd, qd + 0.5 * dt * k2
        k3 = _accel_raw(x2q, x2qd, u, m1, m2, l1, l2, g, d1, d2, jz)
        x3q, x3qd = q + dt * x2qd, qd + dt * k3
        k4 = _accel_raw(x3q, x3qd, u, m1, m2, l1, l2, g, d1, d2, jz)
        q_new = q + (dt / 6.0) * (qd + 2.0 * x1qd + 2.0 * x2qd + x3qd)
        qd_new = qd + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        bad = ~(np.all(np.isfinite(q_new), axis=1)
                & np.all(np.isfinite(qd_new), axis=1))
        newly_bad = bad & alive
        if newly_bad.any():
            for i in np.flatnonzero(newly_bad):
                notes[i] = f"integration fault at t={t + dt:.3f} s"
            alive &= ~newly_bad
        q = np.where(bad[:, None], q, q_new)
        qd = np.where(bad[:, None], np.zeros_like(qd), qd_new)

    cells = []
    for i in range(n):
        conv = bool(alive[i] and terminal_E[i] < energy_tol)
        if not conv:
            settle = float("nan")
        elif ever_loud[i]:
            settle = float(last_loud[i]) + dt  # first sample of the quiet tail
        else:
            settle = 0.0
        cells.append(GridCell(
            l1=float(grid[i, 0]), angle_deg=float(grid[i, 1]),
            rate=float(grid[i, 2]), converged=conv, settling_s=settle,
            peak_force=float(peak_F[i]), peak_torque=float(peak_T[i]),
            note=notes[i]))
    return StabilityGridReport(spec=spec, cells=cells,
                               energy_tol=energy_tol, duration=duration)


# ---------------------------------------------------------------------------
# Controller comparison.
# ---------------------------------------------------------------------------

@dataclass
class ComparisonBundle:
    """Aligned runs of several controllers on one scenario."""

    labels: list
    runs: list  # Trajectory per label, identical time base

    @property
    def columns(self):
        cols = ["t"]
        for label, run in zip(self.labels, self.runs):
            cols.extend(f"{label}_{c}" for c in run.columns if c != "t")
        return cols

    def as_table(self) -> np.ndarray:
        blocks = [self.runs[0].t[:, None]]
        for run in self.runs:
            tab = run.as_table()
            blocks.append(tab[:, 1:])  # drop the per-run time column
        return np.hstack(blocks)

    def to_csv(self, path) -> None:
        write_csv(path, self.columns, self.as_table())

    def run(self, label: str) -> Trajectory:
        return self.runs[self.labels.index(label)]


def compare_controllers(params: PendulumParams, x0, controllers,
                        **sim_kwargs) -> ComparisonBundle:
    """Run each (label, controller) pair on the identical scenario.

    All runs share the plant, initial state, disturbance schedule and
    noise seed, so columns differ only through the control law.
    """
    labels = []
    runs = []
    for label, controller in controllers:
        labels.append(str(label))
        runs.append(simulate(params, x0, controller, **sim_kwargs))
    if len({run.t.shape for run in runs}) > 1:
        raise RuntimeError("controller runs produced unequal time bases")
    return ComparisonBundle(labels=labels, runs=runs)
