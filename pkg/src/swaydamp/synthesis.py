"""Output-feedback LQR gain tuning via linear matrix inequalities.

The damping gains ``F = diag(Kv, Kw)`` close the loop through the
2-output measurement model, so the classic Riccati route does not
apply.  Instead the gains come from

    minimize trace(P)  over P = P', F
    subject to  M(P, F) <= 0,  P > 0

with the 7x7 block matrix

    M = [ A'P + PA + Q + H    G' ]
        [ G                 -R^-1 ],   G = F C - R^-1 B' P,

where the indefinite quadratic coupling is convexified about a fixed
symmetric ``Xi`` by

    H = -(Xi B) R^-1 (B'P) - (P B) R^-1 (B'Xi) + (Xi B) R^-1 (B'Xi).

Substituting ``Xi = P`` turns the Schur complement of ``M`` into the
closed-loop Lyapunov/Riccati inequality, so the outer loop re-solves
with ``Xi <- P`` until trace(P) stalls; each re-linearization keeps the
previous optimum feasible, which makes trace(P) non-increasing.

The inner convex subproblem is solved by a small dense log-barrier
interior-point method written here (Newton steps on the analytic
gradient/Hessian of -log det, geometric barrier reduction, backtracking
line search, feasibility phase I).  For numerical scaling the solver
works on a congruence-scaled M with the -R^-1 corner normalized to -I
and the gain variables premultiplied by R^(1/2); results are mapped
back to the textbook form above, which `assemble_lmi` also reproduces
for certification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .control import DampingGains
from .dynamics import LinearModel

__all__ = [
    "LqrWeights",
    "SynthesisResult",
    "SynthesisError",
    "assemble_lmi",
    "solve_output_feedback_lqr",
    "sigma_sweep",
    "certify",
    "Certification",
    "riccati_lqr",
    "DEFAULT_SIGMA",
    "default_sigma_grid",
    "SWEEP_CSV_COLUMNS",
    "sweep_table",
]

SWEEP_CSV_COLUMNS = ["sigma", "kv", "kw", "cost", "feasible", "iterations",
                     "max_eig_M"]

#: Input-penalty scale the flight gains were tuned at.
DEFAULT_SIGMA = 5e-6

_Q_DIAG = np.array([0.0, 10.0, 0.0, 1.0, 0.0])
_R_DIAG = np.array([1.0, 10.0])


class SynthesisError(RuntimeError):
    """Raised when gain synthesis cannot produce a certified solution."""


@dataclass(frozen=True)
class LqrWeights:
    """State/input penalties; rates are penalized, positions are not."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if Q.shape != (5, 5) or R.shape != (2, 2):
            raise ValueError("Q must be 5x5 and R 2x2")
        if not np.allclose(Q, Q.T) or not np.allclose(R, R.T):
            raise ValueError("weights must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def from_sigma(cls, sigma: float) -> "LqrWeights":
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        return cls(Q=np.diag(_Q_DIAG), R=sigma * np.diag(_R_DIAG))


def default_sigma_grid(n: int = 20) -> np.ndarray:
    return np.geomspace(1e-6, 8e-5, n)


@dataclass
class SynthesisResult:
    F: np.ndarray
    P: np.ndarray
    cost: float
    feasible: bool
    iterations: int
    max_eig_M: float
    min_eig_P: float
    trace_history: list = field(default_factory=list)
    sigma: Optional[float] = None
    message: str = ""

    @property
    def gains(self) -> DampingGains:
        if self.F.shape != (2, 2):
            raise ValueError("gains are only defined for the diagonal structure")
        return DampingGains(kv=float(self.F[0, 0]), kw=float(self.F[1, 1]))


def assemble_lmi(model: LinearModel, weights: LqrWeights, P: np.ndarray,
                 F: np.ndarray, Xi: np.ndarray) -> tuple[np.ndarray, float]:
    """Textbook block LMI ``M`` and the objective value trace(P)."""
    A, B, C = model.A, model.B, model.C
    Rinv = np.linalg.inv(weights.R)
    XiB = Xi @ B
    PB = P @ B
    H = -XiB @ Rinv @ PB.T - PB @ Rinv @ XiB.T + XiB @ Rinv @ XiB.T
    G = F @ C - Rinv @ B.T @ P
    top = A.T @ P + P @ A + weights.Q + H
    M = np.block([[top, G.T], [G, -Rinv]])
    return M, float(np.trace(P))


def riccati_lqr(A, B, Q, R) -> tuple[np.ndarray, np.ndarray]:
    """Full-state LQR via the stable invariant subspace of the Hamiltonian."""
    n = A.shape[0]
    Rinv = np.linalg.inv(R)
    Z = np.block([[A, -B @ Rinv @ B.T], [-Q, -A.T]])
    T, U, sdim = scipy.linalg.schur(Z, output="real", sort="lhp")
    if sdim != n:
        raise SynthesisError("Hamiltonian has no n-dimensional stable subspace")
    U1, U2 = U[:n, :n], U[n:, :n]
    P = scipy.linalg.solve(U1.T, U2.T).T
    P = 0.5 * (P + P.T)
    K = Rinv @ B.T @ P
    return P, K


def _pbh_assert(A, B, C):
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -1e-9:
            continue
        sI = lam * np.eye(n)
        if np.linalg.matrix_rank(np.hstack([sI - A, B.astype(complex)]), tol=1e-9) < n:
            raise SynthesisError(f"model not stabilizable at eigenvalue {lam:.4g}")
        if np.linalg.matrix_rank(np.vstack([sI - A, C.astype(complex)]), tol=1e-9) < n:
            raise SynthesisError(f"model not detectable at eigenvalue {lam:.4g}")


# ---------------------------------------------------------------------------
# Dense log-barrier interior-point core for min c'x s.t. S_k(x) >= 0 (PSD).
# Each block is S(x) = S0 + sum_i x_i * Si with symmetric Si.
# ---------------------------------------------------------------------------

class _Cone:
    def __init__(self, S0: np.ndarray, A: np.ndarray):
        self.S0 = S0          # (m, m)
        self.A = A            # (n, m, m)
        self.m = S0.shape[0]

    def value(self, x):
        return self.S0 + np.tensordot(x, self.A, axes=1)


def _chol_or_none(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _barrier_grad_hess(cones, x):
    n = x.size
    g = np.zeros(n)
    H = np.zeros((n, n))
    for cone in cones:
        S = cone.value(x)
        L = _chol_or_none(S)
        if L is None:
            return None, None
        Sinv = scipy.linalg.cho_solve((L, True), np.eye(cone.m))
        V = np.einsum("ab,ibc->iac", Sinv, cone.A)
        g -= np.einsum("iaa->i", V)
        H += np.einsum("iab,jba->ij", V, V)
    return g, H


def _feasible(cones, x):
    return all(_chol_or_none(c.value(x)) is not None for c in cones)


def _phi(cones, x):
    tot = 0.0
    for cone in cones:
        L = _chol_or_none(cone.value(x))
        if L is None:
            return np.inf
        tot -= 2.0 * np.sum(np.log(np.diag(L)))
    return tot


def _newton_center(c_t, cones, x, *, tol=1e-10, max_iter=80, stop=None):
    """Minimize c_t'x - sum log det S_k(x) from a strictly feasible x."""
    for _ in range(max_iter):
        if stop is not None and stop(x):
            return x
        g_bar, H = _barrier_grad_hess(cones, x)
        if g_bar is None:
            raise SynthesisError("interior-point iterate left the cone")
        g = c_t + g_bar
        jitter = 0.0
        for attempt in range(6):
            try:
                Hj = H if jitter == 0.0 else H + jitter * np.eye(H.shape[0])
                dx = -scipy.linalg.cho_solve(scipy.linalg.cho_factor(Hj), g)
                break
            except np.linalg.LinAlgError:
                jitter = max(10.0 * jitter, 1e-14 * max(1.0, np.trace(H) / H.shape[0]))
        else:
            # Degenerate Hessian: take a clipped-eigenvalue pseudo-Newton step.
            evals, evecs = np.linalg.eigh(H)
            floor = 1e-12 * max(1.0, float(evals[-1]))
            dx = -evecs @ ((evecs.T @ g) / np.maximum(evals, floor))
        lam2 = float(-g @ dx)
        if not math.isfinite(lam2):
            raise SynthesisError("non-finite Newton step")
        if lam2 <= 0.0:  # numerical stall at the bottom of the barrier
            return x
        f0 = float(c_t @ x) + _phi(cones, x)
        alpha = 1.0
        for _ in range(60):
            xn = x + alpha * dx
            fn = float(c_t @ xn) + _phi(cones, xn)
            if fn <= f0 - 0.25 * alpha * lam2:
                break
            alpha *= 0.5
        else:
            return x
        x = xn
        if lam2 * alpha < tol:
            break
    return x


def _barrier_minimize(c, cones, x0, *, gap_rel=1e-9, mu=20.0, max_stages=40,
                      stop=None):
    """Path-following outer loop; returns (x, duality_gap_bound)."""
    if not _feasible(cones, x0):
        raise SynthesisError("interior-point start is not strictly feasible")
    nu = float(sum(cone.m for cone in cones))
    x = x0
    t = max(1.0, nu / max(1.0, abs(float(c @ x0))))
    gap = nu / t
    for _ in range(max_stages):
        x = _newton_center(t * c, cones, x, stop=stop)
        gap = nu / t
        if stop is not None and stop(x):
            break
        if gap <= gap_rel * max(1.0, abs(float(c @ x))):
            break
        t *= mu
    return x, gap


# ---------------------------------------------------------------------------
# Problem assembly in solver (scaled) coordinates.
# ---------------------------------------------------------------------------

_PAIRS = [(i, j) for i in range(5) for j in range(i, 5)]


def _sym_basis():
    basis = np.zeros((len(_PAIRS), 5, 5))
    for k, (i, j) in enumerate(_PAIRS):
        basis[k, i, j] = 1.0
        basis[k, j, i] = 1.0
    return basis


_EBASIS = _sym_basis()


def _p_to_x(P):
    return np.array([P[i, j] for (i, j) in _PAIRS])


def _x_to_p(xp):
    P = np.zeros((5, 5))
    for k, (i, j) in enumerate(_PAIRS):
        P[i, j] = xp[k]
        P[j, i] = xp[k]
    return P


class _ScaledProblem:
    """Affine maps for the scaled LMI in variables (vec(P), Rsqrt*F)."""

    def __init__(self, model, weights, Xi, structure):
        A, B, C = model.A, model.B, model.C
        R = weights.R
        self.model, self.weights, self.Xi = model, weights, Xi
        self.structure = structure
        evals, evecs = np.linalg.eigh(R)
        self.R_sqrt = evecs @ np.diag(np.sqrt(evals)) @ evecs.T
        self.R_isqrt = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
        W = B @ np.linalg.inv(R) @ B.T
        p = C.shape[0]
        if structure == "diag":
            if p != 2:
                raise ValueError("diagonal gain structure needs a 2-output model")
            fvars = [(0, 0), (1, 1)]
        elif structure == "dense":
            fvars = [(r, c) for r in range(2) for c in range(p)]
        else:
            raise ValueError("structure must be 'diag' or 'dense'")
        self.fvars = fvars
        self.n = len(_PAIRS) + len(fvars)

        # Block 1: -Mtilde(x) >= margin, with Mtilde = [[TL, Gt'],[Gt, -I]].
        n1 = 7
        S0 = np.zeros((n1, n1))
        S0[:5, :5] = -(weights.Q + Xi @ W @ Xi)
        S0[5:, 5:] = np.eye(2)
        Amats = np.zeros((self.n, n1, n1))
        BtRi = self.R_isqrt @ B.T
        for k, E in enumerate(_EBASIS):
            XWE = Xi @ W @ E
            TL = A.T @ E + E @ A - XWE - XWE.T
            Gt = -BtRi @ E
            Amats[k, :5, :5] = -TL
            Amats[k, 5:, :5] = -Gt
            Amats[k, :5, 5:] = -Gt.T
        for k, (r, c) in enumerate(fvars, start=len(_PAIRS)):
            Gt = np.zeros((2, 5))
            Gt[r, :] = C[c, :]
            Amats[k, 5:, :5] = -Gt
            Amats[k, :5, 5:] = -Gt.T
        self.m_S0, self.m_A = S0, Amats

        # Block 2: P(x) >= margin.
        Pmats = np.zeros((self.n, 5, 5))
        Pmats[:len(_PAIRS)] = _EBASIS
        self.p_A = Pmats

        self.c = np.zeros(self.n)
        for k, (i, j) in enumerate(_PAIRS):
            if i == j:
                self.c[k] = 1.0

    def pack(self, P, F):
        Ft = self.R_sqrt @ F
        return np.concatenate([_p_to_x(P), [Ft[r, c] for (r, c) in self.fvars]])

    def unpack(self, x):
        P = _x_to_p(x[:len(_PAIRS)])
        Ft = np.zeros((2, self.model.C.shape[0]))
        for k, (r, c) in enumerate(self.fvars, start=len(_PAIRS)):
            Ft[r, c] = x[k]
        return P, self.R_isqrt @ Ft

    def cones(self, eps_m, eps_p):
        c1 = _Cone(self.m_S0 - eps_m * np.eye(7), self.m_A)
        c2 = _Cone(-eps_p * np.eye(5), self.p_A)
        return [c1, c2]

    def mtilde_max_eig(self, x):
        S = self.m_S0 + np.tensordot(x, self.m_A, axes=1)
        return float(-np.min(np.linalg.eigvalsh(S)))


def _solve_fixed_xi(prob: _ScaledProblem, x_start, *, eps=1e-9, gap_rel=1e-9):
    """Phase I (if needed) + phase II for one convexified subproblem."""
    cones = prob.cones(eps, eps)

    x = x_start.copy()
    lam_p = np.min(np.linalg.eigvalsh(_x_to_p(x[:len(_PAIRS)])))
    if lam_p < 2.0 * eps:  # lift P into the cone before anything else
        bump = (2.0 * eps - lam_p) + 1e-6 * max(1.0, abs(lam_p))
        for k, (i, j) in enumerate(_PAIRS):
            if i == j:
                x[k] += bump

    if not _feasible(cones, x):
        # Phase I: minimize s subject to s*I - Mtilde(x) >= 0.  A tiny
        # trace(P) term keeps the subproblem bounded below (otherwise
        # growing P buys unbounded -log det reward).
        n = prob.n
        s0 = prob.mtilde_max_eig(x)
        aug_A = np.zeros((n + 1, 7, 7))
        aug_A[:n] = prob.m_A
        aug_A[n] = np.eye(7)
        cone1 = _Cone(prob.m_S0.copy(), aug_A)
        aug_P = np.zeros((n + 1, 5, 5))
        aug_P[:n] = prob.p_A
        cone2 = _Cone(-eps * np.eye(5), aug_P)
        tr0 = sum(x[k] for k, (i, j) in enumerate(_PAIRS) if i == j)
        eta = 1e-6 * max(1.0, abs(s0)) / max(1.0, abs(tr0))
        c1 = np.zeros(n + 1)
        c1[n] = 1.0
        for k, (i, j) in enumerate(_PAIRS):
            if i == j:
                c1[k] = eta
        xa = np.concatenate([x, [s0 + 0.1 * max(1.0, abs(s0))]])
        target = -max(3.0 * eps, 1e-6 * max(1.0, abs(s0)))

        xa, _ = _barrier_minimize(c1, [cone1, cone2], xa, gap_rel=1e-7,
                                  stop=lambda z: z[-1] <= target)
        if xa[-1] > -1.5 * eps:
            # Infeasible at this Xi; hand back the least-infeasible point
            # so the caller can re-convexify around it.
            return None, float(xa[-1]), xa[:-1]
        x = xa[:-1]

    x, _ = _barrier_minimize(prob.c, cones, x, gap_rel=gap_rel)
    return x, None, None


def solve_output_feedback_lqr(model: LinearModel, weights: LqrWeights, *,
                              structure: str = "diag", xi_init: str = "identity",
                              max_iter: int = 50, tol: float = 1e-6,
                              eps: float = 1e-9, gap_rel: float = 1e-9,
                              warm: Optional[SynthesisResult] = None,
                              sigma: Optional[float] = None) -> SynthesisResult:
    """Tune the damping gains for one weight setting.

    ``xi_init`` selects the first convexification point: ``"identity"``
    (default) or ``"riccati"`` (the full-state solution).  Either way
    the first few convexified subproblems may be infeasible; the
    iteration then re-centers on the least-infeasible point, which
    provably shrinks the infeasibility, before minimizing trace(P).
    A previous `SynthesisResult` can be passed as ``warm`` to continue
    a sweep.  Infeasibility is reported in the result, not raised;
    genuinely broken models (non-stabilizable) do raise
    `SynthesisError`.
    """
    A, B, C = model.A, model.B, model.C
    _pbh_assert(A, B, C)
    if xi_init not in ("identity", "riccati"):
        raise ValueError("xi_init must be 'identity' or 'riccati'")

    P_are, K_are = riccati_lqr(A, B, weights.Q, weights.R)

    if warm is not None and warm.feasible:
        P0, F0 = warm.P, warm.F
        Xi = warm.P
    else:
        # Deliberately inflated start: the solver has to do the work.
        P0 = 1.25 * P_are + 0.05 * np.trace(P_are) / 5.0 * np.eye(5)
        if structure == "dense":
            F0 = np.linalg.lstsq(C.T, K_are.T, rcond=None)[0].T
        else:
            F0 = np.zeros((2, 2))
            for i in range(2):
                ci = C[i, :]
                F0[i, i] = float(K_are[i, :] @ ci) / float(ci @ ci)
        Xi = np.eye(5) if xi_init == "identity" else P_are.copy()

    prob = _ScaledProblem(model, weights, Xi, structure)
    x = prob.pack(P0, F0)

    history: list[float] = []
    s_history: list[float] = []
    P, F = P0, F0
    feasible = False
    message = ""
    it = 0
    for it in range(1, max_iter + 1):
        x_sol, phase1_s, x_hat = _solve_fixed_xi(prob, x, eps=eps, gap_rel=gap_rel)
        if x_sol is None:
            if feasible:
                message = f"re-linearization {it} lost feasibility (s={phase1_s:.2e})"
                break
            # No solution at this Xi.  The infeasibility measure s is
            # non-increasing under Xi <- P at the phase-I minimizer, so
            # re-convexify there and retry until s turns negative or stalls.
            s_history.append(float(phase1_s))
            stalled = (len(s_history) >= 2
                       and abs(s_history[-2] - s_history[-1])
                       < tol * max(1.0, abs(s_history[-1])))
            if stalled or it == max_iter:
                return SynthesisResult(F=F0, P=P0, cost=float("nan"),
                                       feasible=False, iterations=it,
                                       max_eig_M=float(phase1_s),
                                       min_eig_P=float("nan"),
                                       trace_history=history, sigma=sigma,
                                       message="LMI infeasible for this weight setting")
            P, F = prob.unpack(x_hat)
            prob = _ScaledProblem(model, weights, P, structure)
            x = prob.pack(P, F)
            continue
        P, F = prob.unpack(x_sol)
        feasible = True
        tr = float(np.trace(P))
        history.append(tr)
        if len(history) >= 2 and abs(history[-2] - tr) < tol * max(1.0, abs(tr)):
            break
        prob = _ScaledProblem(model, weights, P, structure)
        x = prob.pack(P, F)

    M, cost = assemble_lmi(model, weights, P, F, Xi=P)
    max_eig_M = float(np.max(np.linalg.eigvalsh(M)))
    min_eig_P = float(np.min(np.linalg.eigvalsh(P)))
    return SynthesisResult(F=F, P=P, cost=cost, feasible=feasible, iterations=it,
                           max_eig_M=max_eig_M, min_eig_P=min_eig_P,
                           trace_history=history, sigma=sigma, message=message)


def sigma_sweep(model: LinearModel, sigmas=None, *, structure: str = "diag",
                xi_init: str = "identity", max_iter: int = 50, tol: float = 1e-6,
                warm_start: bool = True) -> list[SynthesisResult]:
    """Re-tune along an input-penalty grid; results come back sorted by sigma.

    Internally the grid is walked from the largest (fastest-converging)
    penalty downward so each harder problem warm-starts from its
    neighbour's certificate.
    """
    if sigmas is None:
        sigmas = default_sigma_grid()
    grid = np.asarray(sigmas, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0) or np.any(np.diff(grid) < 0.0):
        raise ValueError("sigma grid must be positive and sorted ascending")
    order = np.argsort(grid, kind="stable")[::-1]
    by_index: dict[int, SynthesisResult] = {}
    prev: Optional[SynthesisResult] = None
    prev_sigma: Optional[float] = None
    for idx in order:
        s = float(grid[idx])
        if prev is not None and prev_sigma == s:
            by_index[int(idx)] = prev  # repeated weight, same answer
            continue
        res = solve_output_feedback_lqr(model, LqrWeights.from_sigma(s),
                                        structure=structure, xi_init=xi_init,
                                        max_iter=max_iter, tol=tol,
                                        warm=prev if warm_start else None,
                                        sigma=s)
        by_index[int(idx)] = res
        if res.feasible:
            prev = res
            prev_sigma = s
    return [by_index[i] for i in sorted(by_index)]


def sweep_table(results) -> np.ndarray:
    """Sweep results as rows matching `SWEEP_CSV_COLUMNS`."""
    rows = []
    for r in results:
        kv = r.F[0, 0] if r.feasible else float("nan")
        kw = r.F[1, 1] if r.feasible else float("nan")
        rows.append([r.sigma, kv, kw, r.cost, float(r.feasible),
                     float(r.iterations), r.max_eig_M])
    return np.array(rows, dtype=float)


@dataclass
class Certification:
    hurwitz: bool
    eigenvalues: np.ndarray
    max_eig_M: Optional[float]
    lyapunov_cost: Optional[float]


def certify(model: LinearModel, F: np.ndarray, weights: LqrWeights,
            P: Optional[np.ndarray] = None) -> Certification:
    """Independent a-posteriori checks on a gain matrix.

    Closed-loop eigenvalues, the LMI residual at ``Xi = P`` when a
    certificate ``P`` is supplied, and the exact achieved cost
    ``trace(X)`` from the closed-loop Lyapunov equation.
    """
    A, B, C = model.A, model.B, model.C
    Acl = A - B @ F @ C
    eigs = np.linalg.eigvals(Acl)
    hurwitz = bool(np.all(eigs.real < 0.0))
    max_eig_M = None
    if P is not None:
        M, _ = assemble_lmi(model, weights, P, F, Xi=P)
        max_eig_M = float(np.max(np.linalg.eigvalsh(M)))
    cost = None
    if hurwitz:
        Qcl = weights.Q + C.T @ F.T @ weights.R @ F @ C
        X = scipy.linalg.solve_continuous_lyapunov(Acl.T, -Qcl)
        cost = float(np.trace(X))
    return Certification(hurwitz=hurwitz, eigenvalues=eigs,
                         max_eig_M=max_eig_M, lyapunov_cost=cost)
