"""Compile attempt probabilities into concrete time-slot schedules.

A measurement cycle is T slots; at most `capacity` instruments can be
pointed somewhere in any one slot.  Each target's attempts are spread as
evenly as the integers allow (the Bresenham line-drawing rule), because
long gaps between measurements cost more estimation error than bursts of
consecutive measurements ever pay back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ParameterError
from .model import ModelParams
from .riccati import MareProblem, realized_step
from .seeding import substream


@dataclass(frozen=True, eq=False)
class Schedule:
    """Binary attempt matrix: rows are targets, columns are cycle slots."""

    B: np.ndarray
    T: int
    capacity: int

    def slot_loads(self) -> np.ndarray:
        return self.B.sum(axis=0)

    def rates(self) -> np.ndarray:
        return self.B.sum(axis=1) / self.T


def euclidean_pattern(alpha: float, T: int, offset: int = 0) -> np.ndarray:
    """Maximally even binary pattern with about alpha*T ones.

    Slot t fires iff floor((t+1+offset)*alpha) > floor((t+offset)*alpha),
    so consecutive firing gaps never differ by more than one slot.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    ticks = np.floor((np.arange(T + 1) + offset) * alpha)
    return (np.diff(ticks) > 0).astype(np.int8)


def _greedy_offset(pattern_alpha: float, T: int, loads: np.ndarray) -> np.ndarray:
    """Pick the rotation of one target's pattern that keeps slot loads flattest."""
    best = None
    for offset in range(T):
        candidate = euclidean_pattern(pattern_alpha, T, offset)
        trial = loads + candidate
        key = (int(trial.max()), float(np.sum(trial.astype(float) ** 2)), offset)
        if best is None or key < best[0]:
            best = (key, candidate)
    return best[1]


def compile_schedule(policy, T: int, capacity: int | None = None) -> Schedule:
    """Turn an attempt-probability vector into a feasible attempt matrix.

    Targets are placed in descending probability order, each with the
    rotation that minimises the running maximum slot load; any slot still
    over capacity is repaired by moving the lowest-probability offender to
    the nearest free slot (earlier slot on distance ties).
    """
    alpha = np.asarray(policy.alpha, dtype=float)
    if capacity is None:
        capacity = max(1, int(round(policy.budget)))
    if T < 1:
        raise ParameterError(f"T must be at least 1, got {T}")
    total = float(alpha.sum())
    if total > capacity + 1e-9:
        raise InfeasibleError(
            f"attempt probabilities sum to {total:.6g}, above the per-slot capacity {capacity}",
            deficit=total - capacity)

    n = alpha.size
    B = np.zeros((n, T), dtype=np.int8)
    loads = np.zeros(T, dtype=np.int64)
    order = sorted(range(n), key=lambda i: (-alpha[i], i))
    for i in order:
        row = _greedy_offset(alpha[i], T, loads)
        B[i] = row
        loads += row

    _repair_capacity(B, loads, alpha, capacity)
    return Schedule(B=B, T=T, capacity=capacity)


def _repair_capacity(B: np.ndarray, loads: np.ndarray, alpha: np.ndarray, capacity: int) -> None:
    """Move attempts out of over-full slots until every slot fits."""
    T = B.shape[1]
    guard = int(B.sum()) + T
    while True:
        over = np.flatnonzero(loads > capacity)
        if over.size == 0:
            return
        guard -= 1
        if guard < 0:
            raise InfeasibleError("capacity repair did not terminate")
        t = int(over[0])
        offenders = sorted(np.flatnonzero(B[:, t] == 1), key=lambda i: (alpha[i], i))
        moved = False
        for i in offenders:
            spots = [s for s in range(T) if loads[s] < capacity and B[i, s] == 0]
            if not spots:
                continue
            s = min(spots, key=lambda s: (abs(s - t), s))
            B[i, t], B[i, s] = 0, 1
            loads[t] -= 1
            loads[s] += 1
            moved = True
            break
        if not moved:
            # No free slot anywhere: shed the attempt with the largest
            # rounding surplus so the per-target rate stays within 1/T.
            i = max(offenders, key=lambda i: (B[i].sum() - alpha[i] * T, -alpha[i]))
            if B[i].sum() - alpha[i] * T < -1e-9:
                raise InfeasibleError("cannot repair slot capacity without breaking rates")
            B[i, t] = 0
            loads[t] -= 1


def pattern_cost(params: ModelParams, lam: float, pattern: np.ndarray,
                 P0: np.ndarray, replicates: int = 1, seed: int = 0) -> float:
    """Accumulated covariance trace of one target measured on a fixed pattern.

    A measurement can arrive in slot t only when pattern[t] is set and the
    Bernoulli(lam) channel succeeds; the covariance recursion then runs for
    the pattern's full length.  Channel draws are coupled through per-slot
    uniforms, so costs on the same seed are comparable across patterns.
    """
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lam must lie in [0, 1], got {lam}")
    pattern = np.asarray(pattern).astype(bool)
    problem = MareProblem.from_model(params, lam)
    total = 0.0
    for rep in range(replicates):
        uniforms = substream(seed, rep).random(pattern.size)
        P = np.atleast_2d(np.asarray(P0, dtype=float)).copy()
        cost = 0.0
        for attempt, u in zip(pattern, uniforms):
            P = realized_step(problem, P, received=bool(attempt and u < lam))
            cost += float(np.trace(P))
        total += cost
    return total / replicates
