"""Low-pass filter and the damping control laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swaydamp.control import (
    DampingGains,
    FilteredDampingController,
    IdealDampingController,
    ImuSample,
    LowPassFilter,
    PassiveController,
    cutoff_frequency,
    damping_wrench_planar,
    damping_wrench_spatial,
    ideal_wrench,
)
from swaydamp.dynamics import DEFAULT_PARAMS, BodyTwist, linearize

P = DEFAULT_PARAMS
GAINS = DampingGains()  # kv=48, kw=70, kpsi=20


# ---------------------------------------------------------------------------
# First-order filter.
# ---------------------------------------------------------------------------

def test_step_response_settles_within_five_time_constants():
    f = LowPassFilter(tau=0.3)
    f.update(0.0, 1e-9)  # seed at zero
    dt = 1e-3
    y = 0.0
    for _ in range(int(5 * 0.3 / dt)):
        y = f.update(1.0, dt)
    assert abs(y - 1.0) < math.exp(-5) + 1e-6


def test_exact_discretization_against_analytic_decay():
    tau, dt = 0.25, 0.013
    f = LowPassFilter(tau=tau)
    f.update(1.0, dt)  # seeded with the first sample
    for _ in range(50):
        y = f.update(0.0, dt)
    assert y == pytest.approx(math.exp(-50 * dt / tau), rel=1e-12)


def test_sine_at_corner_frequency_attenuates_3db():
    tau = 0.2
    omega = 1.0 / tau
    dt = 2e-4
    f = LowPassFilter(tau=tau)
    t = 0.0
    out, tim = [], []
    while t < 40 * tau:
        t += dt
        out.append(float(f.update(math.sin(omega * t), dt)))
        tim.append(t)
    steady = np.asarray(out[len(out) // 2:])
    assert steady.max() == pytest.approx(1.0 / math.sqrt(2.0), rel=0.01)


def test_filter_seeds_with_first_sample_and_handles_vectors():
    f = LowPassFilter(tau=0.5)
    first = f.update(np.array([3.0, -1.0, 0.5]), 1e-3)
    assert np.allclose(first, [3.0, -1.0, 0.5])
    second = f.update(np.array([3.0, -1.0, 0.5]), 1e-3)
    assert np.allclose(second, first)  # constant input is a fixed point


def test_filter_validates_arguments():
    with pytest.raises(ValueError):
        LowPassFilter(tau=0.0)
    f = LowPassFilter(tau=0.1)
    with pytest.raises(ValueError):
        f.update(1.0, 0.0)


# ---------------------------------------------------------------------------
# Control laws.
# ---------------------------------------------------------------------------

def test_planar_law_formula():
    w = damping_wrench_planar(GAINS, wb=0.3, wb_lp=0.1, params=P)
    assert w.F == pytest.approx(-GAINS.kv * (P.l1 * 0.1 + P.l2 * 0.3))
    assert w.T == pytest.approx(-GAINS.kw * 0.3)


def test_spatial_law_reduces_to_planar_in_the_swing_plane():
    wb = np.array([0.3, 0.0, 0.0])      # planar pitch rate about body x
    wb_lp = np.array([0.1, 0.0, 0.0])
    w = damping_wrench_spatial(GAINS, wb, wb_lp, P)
    ref = damping_wrench_planar(GAINS, 0.3, 0.1, P)
    assert w.F[1] == pytest.approx(ref.F)
    assert w.F[0] == 0.0 and w.F[2] == 0.0
    assert w.T[0] == pytest.approx(ref.T)


def test_spatial_law_damps_yaw_separately():
    wb = np.array([0.0, 0.0, 0.8])
    w = damping_wrench_spatial(GAINS, wb, np.zeros(3), P)
    assert w.T[2] == pytest.approx(-GAINS.kpsi * 0.8)
    assert np.allclose(w.F, 0.0)


@settings(max_examples=40, deadline=None)
@given(vb=st.floats(-5, 5), wb=st.floats(-5, 5))
def test_ideal_law_never_injects_power(vb, wb):
    w = ideal_wrench(GAINS, BodyTwist(vb=vb, wb=wb))
    power = w.F * vb + w.T * wb
    assert power <= 0.0


def test_gain_validation():
    with pytest.raises(ValueError):
        DampingGains(kv=-1.0)
    with pytest.raises(ValueError):
        DampingGains(kw=0.0)


# ---------------------------------------------------------------------------
# Controller objects.
# ---------------------------------------------------------------------------

def test_filtered_controller_composes_filter_and_law():
    ctrl = FilteredDampingController(GAINS, P, tau=0.25)
    ctrl.reset()
    f = LowPassFilter(tau=0.25)
    dt = 5e-3
    for k in range(10):
        wb = math.sin(0.7 * k)
        lp = f.update(wb, dt)
        w = ctrl.update(k * dt, ImuSample(wb=wb), BodyTwist(vb=0.0, wb=wb), dt)
        ref = damping_wrench_planar(GAINS, wb, float(lp), P)
        assert w.F == pytest.approx(ref.F, rel=1e-12)
        assert w.T == pytest.approx(ref.T, rel=1e-12)


def test_default_tau_is_the_mode_midpoint():
    ctrl = FilteredDampingController(GAINS, P)
    assert ctrl.filter.tau == pytest.approx(cutoff_frequency(P)[1], rel=1e-12)


def test_reset_clears_filter_state():
    ctrl = FilteredDampingController(GAINS, P, tau=0.3)
    ctrl.update(0.0, ImuSample(wb=1.0), BodyTwist(vb=0.0, wb=1.0), 1e-2)
    assert ctrl.filter_state is not None
    ctrl.reset()
    assert ctrl.filter_state is None


def test_saturation_clips_commands():
    big = DampingGains(kv=1e4, kw=1e4)
    ctrl = FilteredDampingController(big, P, tau=0.3, saturation=(10.0, 4.0))
    w = ctrl.update(0.0, ImuSample(wb=2.0), BodyTwist(vb=0.0, wb=2.0), 1e-2)
    assert abs(w.F) <= 10.0 + 1e-12
    assert abs(w.T) <= 4.0 + 1e-12

    ideal = IdealDampingController(big, saturation=(10.0, 4.0))
    w = ideal.update(0.0, ImuSample(wb=2.0), BodyTwist(vb=3.0, wb=2.0), 1e-2)
    assert abs(w.F) <= 10.0 + 1e-12
    assert abs(w.T) <= 4.0 + 1e-12


def test_passive_controller_outputs_nothing():
    w = PassiveController().update(0.0, ImuSample(wb=1.0),
                                   BodyTwist(vb=1.0, wb=1.0), 1e-2)
    assert float(np.asarray(w.F)) == 0.0
    assert float(np.asarray(w.T)) == 0.0


def test_paper_gains_stabilize_the_linear_closed_loop():
    m = linearize(P, 1.0 / (2 * math.pi * 0.76))
    F = np.diag([GAINS.kv, GAINS.kw])
    acl = m.A - m.B @ F @ m.C
    assert np.max(np.linalg.eigvals(acl).real) < 0.0
