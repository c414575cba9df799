"""Kalman filtering that tolerates missing measurements.

The predictor runs every slot; the corrector runs only on slots whose
measurement actually arrived.  On a miss the estimate and covariance are
simply carried over from the prediction.  Covariances are re-symmetrized
after every step so long runs cannot drift away from symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import ModelParams, Observation


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.T) / 2.0


@dataclass(frozen=True)
class FilterState:
    """Estimate and error covariance for one target at slot k."""

    x_hat: np.ndarray
    P_hat: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class StepReport:
    """Intermediates of one filter step; `gain` is None when no measurement applied."""

    x_pred: np.ndarray
    P_pred: np.ndarray
    gain: np.ndarray | None
    x_hat: np.ndarray
    P_hat: np.ndarray
    measurement_applied: bool


def initial_state(params: ModelParams, y0: np.ndarray | None = None,
                  p0: float | np.ndarray = 10.0) -> FilterState:
    """Build the slot-0 state: lift a first position fix if one is available.

    With a fix y0 the positions come from the measurement and the velocities
    start at zero; without one the estimate starts at the origin.  `p0` is
    either a scalar scale for an isotropic covariance or a full matrix.
    """
    n = params.n_states
    x0 = params.C.T @ np.asarray(y0, dtype=float) if y0 is not None else np.zeros(n)
    P0 = np.asarray(p0, dtype=float)
    if P0.ndim == 0:
        P0 = float(P0) * np.eye(n)
    return FilterState(x_hat=x0, P_hat=P0, k=0)


def time_update(params: ModelParams, state: FilterState,
                u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Propagate estimate and covariance one slot using the known input."""
    x_pred = params.A @ state.x_hat + params.B @ np.asarray(u, dtype=float)
    P_pred = params.A @ state.P_hat @ params.A.T + params.Q
    return x_pred, P_pred


def measurement_update(params: ModelParams, x_pred: np.ndarray, P_pred: np.ndarray,
                       y: np.ndarray, joseph: bool = False
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fold one measurement into a prediction, returning (gain, x_hat, P_hat).

    The innovation covariance is inverted through a factorization-based
    solve, never explicitly.  `joseph=True` switches the covariance update
    to the numerically stabilised quadratic form.
    """
    C, R = params.C, params.R
    S = symmetrize(C @ P_pred @ C.T + R)
    try:
        # K = P C^T S^{-1}; solve on the symmetric S avoids forming S^{-1}.
        gain = np.linalg.solve(S, C @ P_pred).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular",
                             condition=float(np.linalg.cond(S))) from exc
    x_hat = x_pred + gain @ (np.asarray(y, dtype=float) - C @ x_pred)
    closed = np.eye(params.n_states) - gain @ C
    if joseph:
        P_hat = closed @ P_pred @ closed.T + gain @ R @ gain.T
    else:
        P_hat = closed @ P_pred
    return gain, x_hat, symmetrize(P_hat)


def step(params: ModelParams, state: FilterState, u: np.ndarray, obs: Observation,
         joseph: bool = False) -> tuple[FilterState, StepReport]:
    """Advance the filter one slot, correcting only if `obs` was received."""
    x_pred, P_pred = time_update(params, state, u)
    if obs.received:
        gain, x_hat, P_hat = measurement_update(params, x_pred, P_pred, obs.y, joseph=joseph)
    else:
        gain, x_hat, P_hat = None, x_pred, P_pred
    P_hat = symmetrize(P_hat)
    new_state = FilterState(x_hat=x_hat, P_hat=P_hat, k=state.k + 1)
    report = StepReport(x_pred=x_pred, P_pred=symmetrize(P_pred), gain=gain,
                        x_hat=x_hat, P_hat=P_hat, measurement_applied=obs.received)
    return new_state, report
