"""Linearized five-state model and the closed-form mode frequencies."""

import math

import numpy as np
import pytest

from swaydamp.control import cutoff_frequency
from swaydamp.dynamics import (
    DEFAULT_PARAMS,
    BodyWrench,
    PendulumParams,
    PlanarState,
    linearize,
    mode_frequencies,
    planar_dynamics,
)

P = DEFAULT_PARAMS
TAU = 0.209  # representative filter constant for structure checks


# ---------------------------------------------------------------------------
# Mode frequencies.
# ---------------------------------------------------------------------------

def test_mode_frequency_values():
    nu_slow, nu_fast = mode_frequencies(P)
    assert nu_slow == pytest.approx(0.17880231967571425, rel=1e-12)
    assert nu_fast == pytest.approx(0.7624422628490325, rel=1e-12)
    assert nu_slow < nu_fast


def test_mode_frequencies_match_linear_eigenvalues():
    nu = mode_frequencies(P)
    A = linearize(P, TAU).A[:4, :4]  # undamped chain block, filter removed
    eig = np.linalg.eigvals(A)
    freqs = np.sort(np.unique(np.round(np.abs(eig.imag) / (2 * math.pi), 12)))
    assert freqs.size == 2
    assert np.allclose(freqs, nu, rtol=1e-9)
    assert np.allclose(eig.real, 0.0, atol=1e-9)


def test_mode_frequencies_degenerate_limit():
    # vanishing platform mass with equal links: both modes collapse to
    # the single-pendulum frequency sqrt(g/l)/(2 pi)
    tiny = PendulumParams(m1=18.5, m2=1e-9, l1=4.0, l2=4.0)
    nu_slow, nu_fast = mode_frequencies(tiny)
    single = math.sqrt(tiny.g / tiny.l1) / (2 * math.pi)
    assert nu_slow == pytest.approx(single, rel=1e-4)
    assert nu_fast == pytest.approx(single, rel=1e-4)


# ---------------------------------------------------------------------------
# Linearized matrices.
# ---------------------------------------------------------------------------

def test_linearize_printed_entries():
    m = linearize(P, TAU)
    # closed-form entries, checked to four significant digits
    assert m.A[1, 0] == pytest.approx(-6.4958, rel=5e-4)
    assert m.A[1, 2] == pytest.approx(4.8608, rel=5e-4)
    assert m.A[3, 0] == pytest.approx(17.715, rel=5e-4)
    assert m.A[3, 2] == pytest.approx(-17.715, rel=5e-4)
    assert m.B[1, 1] == pytest.approx(-4.0950e-3, rel=5e-4)
    assert m.B[3, 0] == pytest.approx(8.2645e-3, rel=5e-4)
    assert m.B[3, 1] == pytest.approx(1.4925e-2, rel=5e-4)
    # integrator rows and the filter pair
    assert m.A[0, 1] == 1.0 and m.A[2, 3] == 1.0
    assert m.A[4, 3] == pytest.approx(1.0 / TAU)
    assert m.A[4, 4] == pytest.approx(-1.0 / TAU)


def test_output_matrix_reads_rates_through_geometry():
    m = linearize(P, TAU)
    assert np.allclose(m.C @ np.array([0, 0, 0, 1, 0]), [P.l2, 1.0])
    assert np.allclose(m.C @ np.array([0, 0, 0, 0, 1]), [P.l1, 0.0])
    assert np.allclose(m.C[:, :3], 0.0)


def _nonlinear_rhs(x, u, params, tau):
    """The nonlinear model in the linear state coordinates."""
    q1, q1dot, theta, thetadot, lp = x
    state = PlanarState(q1=q1, q2=theta - q1, q1dot=q1dot,
                        q2dot=thetadot - q1dot)
    acc = planar_dynamics(state, BodyWrench(F=u[0], T=u[1]), params)
    return np.array([q1dot, acc[0], thetadot, acc[0] + acc[1],
                     (thetadot - lp) / tau])


def test_linearize_matches_finite_differences_at_origin():
    params = P.with_(d1=0.0, d2=0.0)  # the synthesis model ignores damping
    m = linearize(params, TAU)
    h = 1e-6
    A_fd = np.zeros((5, 5))
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        A_fd[:, j] = (_nonlinear_rhs(e, np.zeros(2), params, TAU)
                      - _nonlinear_rhs(-e, np.zeros(2), params, TAU)) / (2 * h)
    B_fd = np.zeros((5, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        B_fd[:, j] = (_nonlinear_rhs(np.zeros(5), e, params, TAU)
                      - _nonlinear_rhs(np.zeros(5), -e, params, TAU)) / (2 * h)
    scale_a = np.max(np.abs(m.A))
    scale_b = np.max(np.abs(m.B))
    assert np.allclose(m.A, A_fd, atol=1e-6 * scale_a)
    assert np.allclose(m.B, B_fd, atol=1e-6 * scale_b)


def test_linearize_rejects_bad_tau():
    with pytest.raises(ValueError):
        linearize(P, 0.0)
    with pytest.raises(ValueError):
        linearize(P, -1.0)


# ---------------------------------------------------------------------------
# Filter cutoff rule.
# ---------------------------------------------------------------------------

def test_cutoff_is_mode_midpoint():
    nu_c, tau = cutoff_frequency(P)
    nu = mode_frequencies(P)
    assert nu_c == pytest.approx(0.5 * (nu[0] + nu[1]), rel=1e-12)
    assert nu_c == pytest.approx(0.47062229126237337, rel=1e-12)
    assert tau == pytest.approx(1.0 / (2 * math.pi * nu_c), rel=1e-12)
    assert nu[0] < nu_c < nu[1]


def test_hardware_cutoff_override_constant():
    # identified cutoff of 0.76 Hz used for gain tuning
    assert 1.0 / (2 * math.pi * 0.76) == pytest.approx(0.20941439880512547,
                                                       rel=1e-15)
