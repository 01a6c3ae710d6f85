"""Gain synthesis: the bespoke LMI solver against independent oracles.

Two separate routes guard the solver.  The full-information case
(C = I, dense F) must match the algebraic Riccati solution, computed
here by scipy rather than the package's own Schur-based routine.  The
output-feedback case (diagonal F) has an explicit smooth cost — the
trace of the closed-loop Lyapunov solution as a function of the two
gains — which a derivative-free minimizer can optimize independently
of any LMI machinery.
"""

import math

import numpy as np
import pytest
from scipy.linalg import solve_continuous_are, solve_continuous_lyapunov
from scipy.optimize import minimize

from swaydamp.dynamics import DEFAULT_PARAMS, LinearModel, linearize
from swaydamp.synthesis import (
    DEFAULT_SIGMA,
    SWEEP_CSV_COLUMNS,
    LqrWeights,
    SynthesisError,
    certify,
    default_sigma_grid,
    riccati_lqr,
    sigma_sweep,
    solve_output_feedback_lqr,
    sweep_table,
)

TAU = 1.0 / (2.0 * math.pi * 0.76)  # hardware-identified filter constant
MODEL = linearize(DEFAULT_PARAMS, TAU)
WEIGHTS = LqrWeights.from_sigma(DEFAULT_SIGMA)


@pytest.fixture(scope="module")
def diag_result():
    return solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag",
                                     sigma=DEFAULT_SIGMA)


# ---------------------------------------------------------------------------
# Weights.
# ---------------------------------------------------------------------------

def test_weights_from_sigma_structure():
    w = LqrWeights.from_sigma(2e-6)
    assert np.allclose(w.Q, np.diag([0.0, 10.0, 0.0, 1.0, 0.0]))
    assert np.allclose(w.R, 2e-6 * np.diag([1.0, 10.0]))


def test_weights_validation():
    with pytest.raises(ValueError):
        LqrWeights.from_sigma(0.0)
    with pytest.raises(ValueError):
        LqrWeights(Q=np.eye(4), R=np.eye(2))
    with pytest.raises(ValueError):
        LqrWeights(Q=-np.eye(5), R=np.eye(2))
    with pytest.raises(ValueError):
        LqrWeights(Q=np.eye(5), R=np.zeros((2, 2)))


# ---------------------------------------------------------------------------
# Riccati route (full information).
# ---------------------------------------------------------------------------

def test_riccati_solver_matches_scipy():
    P_scipy = solve_continuous_are(MODEL.A, MODEL.B, WEIGHTS.Q, WEIGHTS.R)
    P, K = riccati_lqr(MODEL.A, MODEL.B, WEIGHTS.Q, WEIGHTS.R)
    assert np.allclose(P, P_scipy, rtol=1e-8, atol=1e-10)
    K_scipy = np.linalg.solve(WEIGHTS.R, MODEL.B.T @ P_scipy)
    assert np.allclose(K, K_scipy, rtol=1e-8, atol=1e-8)


def test_riccati_gain_ignores_the_filter_state():
    # the filter state is not reachable through feedback and carries no
    # cost, so the optimal full-state gain cannot use it
    P, K = riccati_lqr(MODEL.A, MODEL.B, WEIGHTS.Q, WEIGHTS.R)
    assert np.allclose(K[:, 4], 0.0, atol=1e-8)
    assert min(np.linalg.eigvalsh(P)) == pytest.approx(0.0, abs=1e-9)


def test_dense_full_information_solve_matches_riccati():
    model = LinearModel(A=MODEL.A, B=MODEL.B, C=np.eye(5), tau=MODEL.tau,
                        params=MODEL.params)
    res = solve_output_feedback_lqr(model, WEIGHTS, structure="dense")
    P_are, K = riccati_lqr(MODEL.A, MODEL.B, WEIGHTS.Q, WEIGHTS.R)
    assert res.feasible
    assert res.cost == pytest.approx(np.trace(P_are), rel=1e-4)
    assert np.allclose(res.F, K, atol=1e-3 * max(1.0, np.abs(K).max()))


# ---------------------------------------------------------------------------
# Output-feedback route (diagonal F).
# ---------------------------------------------------------------------------

def _lyapunov_cost(model, weights, kv, kw):
    F = np.diag([kv, kw])
    acl = model.A - model.B @ F @ model.C
    if np.max(np.linalg.eigvals(acl).real) >= -1e-12:
        return np.inf
    Qcl = weights.Q + model.C.T @ F.T @ weights.R @ F @ model.C
    X = solve_continuous_lyapunov(acl.T, -Qcl)
    return float(np.trace(X))


def _true_diag_optimum(model, weights, start=(50.0, 70.0)):
    res = minimize(lambda g: _lyapunov_cost(model, weights, *g), start,
                   method="Nelder-Mead",
                   options=dict(xatol=1e-9, fatol=1e-13, maxiter=4000))
    assert res.success
    return res.x, res.fun


def test_diagonal_gains_land_near_field_values(diag_result):
    assert diag_result.feasible
    kv, kw = diag_result.F[0, 0], diag_result.F[1, 1]
    assert kv == pytest.approx(49.67, abs=0.2)
    assert kw == pytest.approx(70.58, abs=0.2)
    assert diag_result.cost == pytest.approx(38.8572, abs=2e-3)


def test_diagonal_solution_matches_derivative_free_optimum(diag_result):
    gains, best = _true_diag_optimum(MODEL, WEIGHTS)
    kv, kw = diag_result.F[0, 0], diag_result.F[1, 1]
    assert kv == pytest.approx(gains[0], rel=1e-2)
    assert kw == pytest.approx(gains[1], rel=1e-2)
    # certified upper bound can exceed the true optimum only marginally
    assert diag_result.cost >= best - 1e-9
    assert diag_result.cost == pytest.approx(best, rel=1e-4)


def test_certification_of_feasible_result(diag_result):
    cert = certify(MODEL, diag_result.F, WEIGHTS, P=diag_result.P)
    assert cert.hurwitz
    assert cert.max_eig_M <= 1e-8
    assert min(np.linalg.eigvalsh(diag_result.P)) > 0.0
    assert cert.lyapunov_cost <= diag_result.cost + 1e-6
    assert np.max(cert.eigenvalues.real) < 0.0


def test_trace_history_monotone_after_feasibility(diag_result):
    hist = np.asarray(diag_result.trace_history)
    assert hist.size >= 2
    assert np.all(np.diff(hist) <= 1e-6 * np.abs(hist[:-1]) + 1e-9)


def test_xi_initializations_agree(diag_result):
    alt = solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag",
                                    xi_init="riccati")
    assert alt.feasible
    assert alt.cost == pytest.approx(diag_result.cost, rel=1e-4)
    assert alt.F[0, 0] == pytest.approx(diag_result.F[0, 0], rel=1e-2)


def test_solver_is_deterministic():
    a = solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag")
    b = solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag")
    assert np.array_equal(a.F, b.F)
    assert np.array_equal(a.P, b.P)
    assert a.cost == b.cost
    assert a.iterations == b.iterations


def test_cost_scales_linearly_with_the_weights():
    res = solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag")
    scaled = LqrWeights(Q=3.0 * WEIGHTS.Q, R=3.0 * WEIGHTS.R)
    res3 = solve_output_feedback_lqr(MODEL, scaled, structure="diag")
    assert res3.cost == pytest.approx(3.0 * res.cost, rel=1e-5)
    assert res3.F[0, 0] == pytest.approx(res.F[0, 0], rel=1e-3)
    assert res3.F[1, 1] == pytest.approx(res.F[1, 1], rel=1e-3)


def test_unstabilizable_model_is_rejected():
    model = LinearModel(A=MODEL.A, B=np.zeros((5, 2)), C=MODEL.C,
                        tau=MODEL.tau, params=MODEL.params)
    with pytest.raises(SynthesisError):
        solve_output_feedback_lqr(model, WEIGHTS)


def test_certify_flags_the_open_loop_as_not_hurwitz():
    cert = certify(MODEL, np.zeros((2, 2)), WEIGHTS)
    assert not cert.hurwitz


def test_iteration_cap_reports_infeasible_honestly():
    res = solve_output_feedback_lqr(MODEL, WEIGHTS, structure="diag",
                                    max_iter=1)
    assert not res.feasible
    assert "infeasible" in res.message
    assert math.isnan(res.cost)


# ---------------------------------------------------------------------------
# Sigma sweep.
# ---------------------------------------------------------------------------

def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        sigma_sweep(MODEL, [])
    with pytest.raises(ValueError):
        sigma_sweep(MODEL, [1e-6, -1e-6])
    with pytest.raises(ValueError):
        sigma_sweep(MODEL, [5e-6, 1e-6])


def test_default_grid_spans_the_documented_range():
    g = default_sigma_grid()
    assert g.size == 20
    assert g[0] == pytest.approx(1e-6)
    assert g[-1] == pytest.approx(8e-5)
    assert np.all(np.diff(g) > 0.0)


def test_sweep_results_sorted_and_repeat_sigma_identical():
    grid = [2e-6, 2e-6, 2e-5]
    results = sigma_sweep(MODEL, grid)
    assert [r.sigma for r in results] == grid
    assert np.array_equal(results[0].F, results[1].F)
    assert results[0].cost == results[1].cost
    assert all(r.feasible for r in results)
    kv = [r.F[0, 0] for r in results]
    assert kv[2] < kv[0]  # heavier input penalty, gentler gain


def test_sweep_table_matches_columns():
    results = sigma_sweep(MODEL, [5e-6])
    table = sweep_table(results)
    assert table.shape == (1, len(SWEEP_CSV_COLUMNS))
    assert table[0, 0] == pytest.approx(5e-6)
    assert table[0, 4] == 1.0
    assert table[0, 6] <= 1e-8
