"""Fixed-step simulation loop: events, noise seeding, CSV export."""

import numpy as np
import pytest

from swaydamp.control import DampingGains, FilteredDampingController, PassiveController
from swaydamp.dynamics import DEFAULT_PARAMS, PlanarState
from swaydamp.simulate import (
    PLANAR_CSV_COLUMNS,
    DisturbanceEvent,
    DisturbanceSchedule,
    GyroNoise,
    simulate,
    write_csv,
)
from swaydamp.spatial import SpatialState

P = DEFAULT_PARAMS


def _ctrl():
    return FilteredDampingController(DampingGains(), P)


# ---------------------------------------------------------------------------
# Disturbance events.
# ---------------------------------------------------------------------------

def test_impulse_acts_only_inside_its_window():
    ev = DisturbanceEvent(kind="impulse", start=1.0, force=10.0, duration=0.5)
    assert ev.evaluate(0.99)[0] == 0.0
    assert ev.evaluate(1.0)[0] == 10.0
    assert ev.evaluate(1.49)[0] == 10.0
    assert ev.evaluate(1.51)[0] == 0.0


def test_step_persists_and_sinusoid_stops():
    step = DisturbanceEvent(kind="step", start=2.0, torque=3.0)
    assert step.evaluate(1.0)[1] == 0.0
    assert step.evaluate(100.0)[1] == 3.0
    sin = DisturbanceEvent(kind="sinusoid", start=0.0, force=2.0,
                           duration=1.0, frequency=1.0)
    assert sin.evaluate(0.25)[0] == pytest.approx(2.0)
    assert sin.evaluate(1.5)[0] == 0.0


def test_jerk_train_alternates_sign():
    ev = DisturbanceEvent(kind="jerk_train", start=0.0, force=5.0,
                          duration=0.1, count=4, period=0.5)
    assert ev.evaluate(0.05)[0] == 5.0
    assert ev.evaluate(0.55)[0] == -5.0
    assert ev.evaluate(1.05)[0] == 5.0
    assert ev.evaluate(1.55)[0] == -5.0
    assert ev.evaluate(2.05)[0] == 0.0  # past the burst
    assert ev.evaluate(0.3)[0] == 0.0   # between pulses


def test_schedule_sums_overlapping_events():
    sched = DisturbanceSchedule([
        DisturbanceEvent(kind="step", start=0.0, force=1.0),
        DisturbanceEvent(kind="step", start=0.0, force=2.0),
    ])
    F, _ = sched(1.0)
    assert F == pytest.approx(3.0)


def test_unknown_event_kind_raises():
    with pytest.raises(ValueError):
        DisturbanceEvent(kind="bump", start=0.0).evaluate(0.0)


# ---------------------------------------------------------------------------
# Simulation loop.
# ---------------------------------------------------------------------------

def test_control_is_zero_order_held_between_samples():
    traj = simulate(P, PlanarState(q1=0.2), _ctrl(), duration=0.5, dt=1e-3,
                    control_rate=200.0)
    # 200 Hz on a 1 kHz integration grid: the wrench changes at most
    # every 5th sample
    F = traj.F
    changes = np.nonzero(np.diff(F))[0] + 1
    assert changes.size > 0
    assert np.all(changes % 5 == 0)


def test_noise_same_seed_reproduces_different_seed_differs():
    noise = GyroNoise(enabled=True, density_deg=0.05)
    kw = dict(duration=1.0, dt=1e-3, noise=noise)
    a = simulate(P, PlanarState(q1=0.1), _ctrl(), seed=7, **kw)
    b = simulate(P, PlanarState(q1=0.1), _ctrl(), seed=7, **kw)
    c = simulate(P, PlanarState(q1=0.1), _ctrl(), seed=8, **kw)
    assert np.array_equal(a.as_table(), b.as_table())
    assert not np.array_equal(a.as_table(), c.as_table())


def test_disabled_noise_ignores_seed():
    a = simulate(P, PlanarState(q1=0.1), _ctrl(), duration=1.0, dt=1e-3,
                 seed=1)
    b = simulate(P, PlanarState(q1=0.1), _ctrl(), duration=1.0, dt=1e-3,
                 seed=2)
    assert np.array_equal(a.as_table(), b.as_table())


def test_trajectory_shapes_and_columns():
    traj = simulate(P, PlanarState(q1=0.1), _ctrl(), duration=0.2, dt=1e-3)
    n = traj.t.size
    assert n == 201
    assert traj.columns == PLANAR_CSV_COLUMNS
    assert traj.as_table().shape == (n, len(PLANAR_CSV_COLUMNS))

    straj = simulate(P, SpatialState(phi1y=0.1), _ctrl(), duration=0.2,
                     dt=1e-3)
    assert straj.as_table().shape == (201, len(straj.columns))
    assert straj.columns[0] == "t" and straj.columns[-1] == "energy"


def test_simulate_validates_arguments():
    with pytest.raises(ValueError):
        simulate(P, PlanarState(), _ctrl(), duration=0.0, dt=1e-3)
    with pytest.raises(ValueError):
        simulate(P, PlanarState(), _ctrl(), duration=1.0, dt=-1e-3)
    with pytest.raises(TypeError):
        simulate(P, np.zeros(4), _ctrl(), duration=1.0, dt=1e-3)


def test_simulate_resets_controller_state():
    ctrl = _ctrl()
    simulate(P, PlanarState(q1=0.3), ctrl, duration=0.5, dt=1e-3)
    first = ctrl.filter_state
    traj1 = simulate(P, PlanarState(q1=0.3), ctrl, duration=0.5, dt=1e-3)
    traj2 = simulate(P, PlanarState(q1=0.3), ctrl, duration=0.5, dt=1e-3)
    assert first is not None
    assert np.array_equal(traj1.as_table(), traj2.as_table())


# ---------------------------------------------------------------------------
# CSV export.
# ---------------------------------------------------------------------------

def test_csv_round_trips_floats_exactly(tmp_path):
    traj = simulate(P, PlanarState(q1=0.2, q2=-0.1), _ctrl(),
                    duration=0.3, dt=1e-3)
    out = tmp_path / "traj.csv"
    traj.to_csv(out)
    header = out.read_text().splitlines()[0]
    assert header == ",".join(PLANAR_CSV_COLUMNS)
    back = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.array_equal(back, traj.as_table())


def test_write_csv_is_byte_stable(tmp_path):
    table = np.array([[1.0, np.pi], [1e-17, -2.5]])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, ["x", "y"], table)
    write_csv(b, ["x", "y"], table)
    assert a.read_bytes() == b.read_bytes()
    assert "3.141592653589793" in a.read_text()
