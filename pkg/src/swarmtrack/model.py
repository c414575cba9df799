"""Linear motion model with lossy position measurements.

A target flies with nearly constant velocity in 3-D; commanded
accelerations enter through the input matrix and everything else is
zero-mean Gaussian disturbance.  One slot of the discretized dynamics:

    x[k+1] = A x[k] + B u[k] + w[k],          w ~ N(0, Q)
    y[k]   = C x[k] + v[k]   (slot received), v ~ N(0, R)

State vectors are plain float arrays [x, y, z, vx, vy, vz] (m, m/s) and
inputs are accelerations [ax, ay, az] (m/s^2).  Whether a slot's
measurement is received is an independent Bernoulli draw with success
probability ``lam``.  All functions are pure given an explicit generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .seeding import INPUT, PROCESS, substream

_SYM_TOL = 1e-9
INPUT_MODES = ("zero", "white_noise", "sequence")


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    return arr


def _check_covariance(mat: np.ndarray, name: str) -> None:
    if mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=_SYM_TOL):
        raise ParameterError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(mat)
    scale = max(1.0, float(np.max(np.abs(eigs), initial=0.0)))
    if float(eigs.min(initial=0.0)) < -1e-9 * scale:
        raise ParameterError(f"{name} must be positive semi-definite")


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tolerates singular input."""
    w, v = np.linalg.eigh(np.asarray(mat, dtype=float))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


@dataclass(frozen=True, eq=False)
class ModelParams:
    """System matrices for one target.  Dimensions follow A (n x n)."""

    dt: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        for name in ("A", "B", "C", "Q", "R"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ParameterError(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != n:
            raise ParameterError(f"B must have {n} rows, got shape {self.B.shape}")
        if self.C.shape[1] != n:
            raise ParameterError(f"C must have {n} columns, got shape {self.C.shape}")
        if self.Q.shape != (n, n):
            raise ParameterError(f"Q must be {n}x{n}, got shape {self.Q.shape}")
        m = self.C.shape[0]
        if self.R.shape != (m, m):
            raise ParameterError(f"R must be {m}x{m}, got shape {self.R.shape}")
        _check_covariance(self.Q, "Q")
        _check_covariance(self.R, "R")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_meas(self) -> int:
        return self.C.shape[0]


def default_model(dt: float = 0.1, q_scale: float = 0.1, r_scale: float = 10.0) -> ModelParams:
    """Standard 6-state constant-velocity model with isotropic noise.

    A couples position to velocity over one step of length `dt`, B applies
    accelerations to the velocities (Euler step), and C reads out the three
    position components.  Q = q_scale * I6 and R = r_scale * I3.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if q_scale < 0:
        raise ParameterError(f"q_scale must be non-negative, got {q_scale}")
    if r_scale <= 0:
        raise ParameterError(f"r_scale must be positive, got {r_scale}")
    eye3 = np.eye(3)
    zero3 = np.zeros((3, 3))
    A = np.block([[eye3, dt * eye3], [zero3, eye3]])
    B = np.vstack([zero3, dt * eye3])
    C = np.hstack([eye3, zero3])
    return ModelParams(dt=dt, A=A, B=B, C=C, Q=q_scale * np.eye(6), R=r_scale * np.eye(3))


@dataclass(frozen=True)
class Observation:
    """One slot's measurement outcome; `y` is present only when received."""

    received: bool
    y: np.ndarray | None = None

    def __post_init__(self):
        if self.received and self.y is None:
            raise ParameterError("received observation must carry a measurement")
        if not self.received and self.y is not None:
            raise ParameterError("missed observation must not carry a measurement")
        if self.y is not None:
            object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


def step_truth(params: ModelParams, state: np.ndarray, u: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    """Propagate the true state one slot with process noise drawn from rng."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    w = psd_sqrt(params.Q) @ rng.standard_normal(params.n_states)
    return params.A @ x + params.B @ u + w


def observe(params: ModelParams, state: np.ndarray, lam: float,
            rng: np.random.Generator) -> Observation:
    """Draw one slot's measurement through a Bernoulli(lam) channel."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lam must lie in [0, 1], got {lam}")
    if rng.random() >= lam:
        return Observation(received=False)
    x = np.asarray(state, dtype=float)
    v = psd_sqrt(params.R) @ rng.standard_normal(params.n_meas)
    return Observation(received=True, y=params.C @ x + v)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Shape of a simulated truth run: length, input source, and seed."""

    horizon: int
    input_mode: str = "zero"
    accel_var: float = 0.0
    inputs: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterError(f"horizon must be at least 1, got {self.horizon}")
        if self.input_mode not in INPUT_MODES:
            raise ParameterError(f"input_mode must be one of {INPUT_MODES}, got {self.input_mode!r}")
        if self.accel_var < 0:
            raise ParameterError(f"accel_var must be non-negative, got {self.accel_var}")
        if self.input_mode == "sequence" and self.inputs is None:
            raise ParameterError("input_mode 'sequence' requires an inputs array")
        if self.inputs is not None:
            object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=float))


@dataclass(frozen=True)
class Trajectory:
    """Ground truth states (horizon+1, n) and the inputs (horizon, p) that produced them."""

    states: np.ndarray
    inputs: np.ndarray


def generate_trajectory(params: ModelParams, config: TrajectoryConfig, x0: np.ndarray,
                        process_rng: np.random.Generator | None = None,
                        input_rng: np.random.Generator | None = None) -> Trajectory:
    """Simulate the truth for `config.horizon` slots starting from x0.

    Inputs are stored alongside the states so a filter can consume them as
    known quantities.  Without explicit generators the draw is a pure
    function of (params, config, x0, config.seed).
    """
    if process_rng is None:
        process_rng = substream(config.seed, PROCESS)
    if input_rng is None:
        input_rng = substream(config.seed, INPUT)
    n, p, horizon = params.n_states, params.n_inputs, config.horizon

    if config.input_mode == "zero":
        inputs = np.zeros((horizon, p))
    elif config.input_mode == "white_noise":
        inputs = np.sqrt(config.accel_var) * input_rng.standard_normal((horizon, p))
    else:
        inputs = np.asarray(config.inputs, dtype=float)
        if inputs.shape != (horizon, p):
            raise ParameterError(
                f"inputs must have shape ({horizon}, {p}), got {inputs.shape}")

    noise = process_rng.standard_normal((horizon, n)) @ psd_sqrt(params.Q).T
    states = np.empty((horizon + 1, n))
    states[0] = np.asarray(x0, dtype=float)
    for k in range(horizon):
        states[k + 1] = params.A @ states[k] + params.B @ inputs[k] + noise[k]
    return Trajectory(states=states, inputs=inputs)
