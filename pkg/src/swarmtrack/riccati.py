"""Expected steady-state error covariance under a lossy measurement channel.

The covariance map

    g(P) = A P A^T + Q - lam * A P C^T (C P C^T + R)^{-1} C P A^T

blends the classical Riccati recursion (lam = 1) with the open-loop
Lyapunov recursion (lam = 0).  Its fixed point, when the iteration stays
bounded, is the expected one-step-prediction error covariance of a Kalman
filter whose measurements arrive with probability lam.  Below a critical
arrival probability the iteration blows up; `estimate_critical_lambda`
brackets that threshold by bisection on an empirical boundedness test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .kalman import symmetrize
from .model import ModelParams, psd_sqrt
from .seeding import substream

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 5000
DEFAULT_BLOWUP = 1e12


@dataclass(frozen=True, eq=False)
class MareProblem:
    """Dynamics, readout, noise covariances, and the channel arrival rate."""

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    lam: float

    def __post_init__(self):
        for name in ("A", "C", "Q", "R"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lam must lie in [0, 1], got {self.lam}")

    @classmethod
    def from_model(cls, params: ModelParams, lam: float) -> "MareProblem":
        return cls(A=params.A, C=params.C, Q=params.Q, R=params.R, lam=lam)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class MareSolution:
    """Outcome of the fixed-point iteration.

    `residual` is the Frobenius norm of P - g(P) at the last update.
    `diverged` records that the trace crossed the blow-up bound, which is
    reported, not raised.
    """

    P_star: np.ndarray
    iterations: int
    converged: bool
    residual: float
    diverged: bool = False


def _correction(problem: MareProblem, P: np.ndarray) -> np.ndarray:
    """The measurement benefit A P C^T (C P C^T + R)^{-1} C P A^T."""
    C = problem.C
    S = symmetrize(C @ P @ C.T + problem.R)
    W = problem.A @ P @ C.T
    try:
        return W @ np.linalg.solve(S, W.T)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular",
                             condition=float(np.linalg.cond(S))) from exc


def mare_operator(problem: MareProblem, P: np.ndarray) -> np.ndarray:
    """One application of the covariance map; the result is symmetrized."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    out = problem.A @ P @ problem.A.T + problem.Q
    if problem.lam > 0.0:
        out = out - problem.lam * _correction(problem, P)
    return symmetrize(out)


def realized_step(problem: MareProblem, P: np.ndarray, received: bool) -> np.ndarray:
    """One slot of the covariance recursion for an actual channel outcome."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    out = problem.A @ P @ problem.A.T + problem.Q
    if received:
        out = out - _correction(problem, P)
    return symmetrize(out)


def solve_fixed_point(problem: MareProblem, P0: np.ndarray | None = None,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      blowup: float = DEFAULT_BLOWUP) -> MareSolution:
    """Iterate P <- g(P) until the update is smaller than `tol`.

    Starting from P0 (default Q).  Divergence, detected as the trace
    exceeding `blowup`, is reported through the solution flags rather than
    raised; so is running out of iterations.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    P = problem.Q.copy() if P0 is None else np.atleast_2d(np.asarray(P0, dtype=float)).copy()
    residual = np.inf
    for iteration in range(max_iter + 1):
        P_next = mare_operator(problem, P)
        residual = float(np.linalg.norm(P_next - P))
        P = P_next
        if residual <= tol:
            return MareSolution(P_star=P, iterations=iteration, converged=True,
                                residual=residual)
        if float(np.trace(P)) > blowup:
            return MareSolution(P_star=P, iterations=iteration, converged=False,
                                residual=residual, diverged=True)
    return MareSolution(P_star=P, iterations=max_iter, converged=False, residual=residual)


def _stays_bounded(A, C, Q, R, lam: float, P0, max_iter: int, blowup: float) -> bool:
    problem = MareProblem(A=A, C=C, Q=Q, R=R, lam=lam)
    sol = solve_fixed_point(problem, P0=P0, tol=1e-6, max_iter=max_iter, blowup=blowup)
    return not sol.diverged


def estimate_critical_lambda(A, C, Q, R, tol: float = 0.02,
                             P0: np.ndarray | None = None,
                             max_iter: int = DEFAULT_MAX_ITER,
                             blowup: float = DEFAULT_BLOWUP) -> tuple[float, float]:
    """Bracket the smallest arrival rate with a bounded covariance iteration.

    Bisection on [0, 1] using blow-up of the fixed-point iteration as the
    unboundedness oracle.  Returns (lo, hi) with hi - lo <= tol; (0, 0) when
    even the no-measurement recursion stays bounded, (1, 1) in the
    pathological case where no rate keeps it bounded.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if _stays_bounded(A, C, Q, R, 0.0, P0, max_iter, blowup):
        return 0.0, 0.0
    if not _stays_bounded(A, C, Q, R, 1.0, P0, max_iter, blowup):
        return 1.0, 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if _stays_bounded(A, C, Q, R, mid, P0, max_iter, blowup):
            hi = mid
        else:
            lo = mid
    return lo, hi


def expected_error_trace(problem: MareProblem, horizon: int, replicates: int,
                         seed: int = 0, P0: np.ndarray | None = None) -> float:
    """Monte-Carlo estimate of the expected covariance trace after `horizon` slots.

    Each replicate draws an independent Bernoulli(lam) arrival sequence and
    runs the realized covariance recursion from P0 (default zero).  Arrival
    draws are coupled through per-slot uniforms, so estimates at a higher
    rate never exceed estimates at a lower rate on the same seed.
    """
    if horizon < 1 or replicates < 1:
        raise ParameterError("horizon and replicates must be at least 1")
    P_init = np.zeros((problem.n, problem.n)) if P0 is None \
        else np.atleast_2d(np.asarray(P0, dtype=float))
    total = 0.0
    for rep in range(replicates):
        uniforms = substream(seed, rep).random(horizon)
        P = P_init.copy()
        for u in uniforms:
            P = realized_step(problem, P, received=bool(u < problem.lam))
        total += float(np.trace(P))
    return total / replicates


def diagnostics(A, C, Q, B=None) -> dict:
    """Rank tests behind the usual convergence conditions (informational only)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = A.shape[0]

    def _staircase(base: np.ndarray, transition: np.ndarray, by_rows: bool) -> int:
        blocks, term = [], base
        for _ in range(n):
            blocks.append(term)
            term = term @ transition if by_rows else transition @ term
        stacked = np.vstack(blocks) if by_rows else np.hstack(blocks)
        return int(np.linalg.matrix_rank(stacked))

    out = {
        "n": n,
        "observability_rank": _staircase(C, A, by_rows=True),
        "noise_controllability_rank": _staircase(psd_sqrt(Q), A, by_rows=False),
    }
    out["observable"] = out["observability_rank"] == n
    if B is not None:
        B = np.atleast_2d(np.asarray(B, dtype=float))
        out["controllability_rank"] = _staircase(B, A, by_rows=False)
        out["controllable"] = out["controllability_rank"] == n
    return out
