"""Allocation of measurement-attempt probabilities across targets.

Three allocators live here.  `water_fill` grants every target the floor
probability it needs for a bounded error covariance, then splits the
leftover budget equally.  `minimax_allocate` greedily feeds whichever
target currently has the worst expected covariance trace.  The swarm
search (`init_swarm` / `pso_iterate` / `optimize`) evolves a population of
hypotheses about the unknown channel and noise parameters together with
candidate probability vectors, scoring each hypothesis by how closely its
predicted covariance traces shadow the live filters'.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, ParameterError
from .kalman import FilterState, symmetrize
from .model import ModelParams
from .riccati import MareProblem, expected_error_trace

_LOG_BOUND = np.log(1e8)


@dataclass(frozen=True, eq=False)
class Policy:
    """Per-target attempt probabilities alpha under a total budget."""

    alpha: np.ndarray
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))


def _feasible_floors(lambdas: np.ndarray, lambda_c: np.ndarray, budget: float) -> np.ndarray:
    if budget <= 0:
        raise ParameterError(f"budget must be positive, got {budget}")
    if np.any(lambdas <= 0):
        raise ParameterError("all channel rates must be positive")
    if np.any(lambda_c < 0) or np.any(lambda_c > 1):
        raise ParameterError("critical rates must lie in [0, 1]")
    floors = lambda_c / lambdas
    total = float(floors.sum())
    if np.any(floors > 1 + 1e-12) or total > budget + 1e-9:
        deficit = max(total - budget, float(floors.max()) - 1.0)
        raise InfeasibleError(
            f"probability floors need {total:.6g} of a budget of {budget:.6g} "
            f"(short by {deficit:.6g})", deficit=deficit)
    return np.minimum(floors, 1.0)


def water_fill(lambdas, lambda_c, budget: float) -> Policy:
    """Floors first, then spread what is left equally among uncapped targets.

    Each target i gets at least lambda_c[i] / lambdas[i] so its effective
    measurement rate clears the boundedness threshold; the remaining budget
    is split evenly, re-splitting whenever a target saturates at 1.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    lambda_c = np.asarray(lambda_c, dtype=float)
    alpha = _feasible_floors(lambdas, lambda_c, budget)
    remaining = budget - float(alpha.sum())
    while remaining > 1e-12:
        active = np.flatnonzero(alpha < 1 - 1e-12)
        if active.size == 0:
            break
        share = remaining / active.size
        granted = np.minimum(share, 1.0 - alpha[active])
        alpha[active] += granted
        remaining -= float(granted.sum())
    return Policy(alpha=alpha, budget=float(budget))


def project_alpha(alpha: np.ndarray, floors: np.ndarray, budget: float) -> np.ndarray:
    """Clamp to [0, 1], raise to the floors, then shrink any above-floor
    surplus proportionally until the budget holds."""
    a = np.clip(np.asarray(alpha, dtype=float), 0.0, 1.0)
    a = np.maximum(a, floors)
    over = float(a.sum()) - budget
    if over > 1e-12:
        surplus = a - floors
        total = float(surplus.sum())
        scale = max(0.0, (budget - float(floors.sum())) / total)
        a = floors + surplus * scale
    return a


def minimax_allocate(problems: Sequence[MareProblem], budget: float, step: float = 0.01,
                     lambda_c=None, horizon: int = 60, replicates: int = 16,
                     seed: int = 0) -> tuple[Policy, float]:
    """Greedy descent on the worst-case expected covariance trace.

    Starting from the feasibility floors, repeatedly grant `step` of attempt
    probability to the target whose current expected trace is largest, until
    the budget runs out or everyone saturates.  Returns the allocation and
    the final worst trace.  Evaluations reuse one seed per target, so the
    greedy path is deterministic.
    """
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    n = len(problems)
    lambdas = np.array([p.lam for p in problems], dtype=float)
    lambda_c = np.zeros(n) if lambda_c is None else np.asarray(lambda_c, dtype=float)
    alpha = _feasible_floors(lambdas, lambda_c, budget)

    def evaluate(i: int) -> float:
        rate = float(np.clip(alpha[i] * lambdas[i], 0.0, 1.0))
        return expected_error_trace(replace(problems[i], lam=rate), horizon,
                                    replicates, seed=seed + i)

    traces = np.array([evaluate(i) for i in range(n)])
    remaining = budget - float(alpha.sum())
    while remaining > 1e-12:
        open_targets = np.flatnonzero(alpha < 1 - 1e-12)
        if open_targets.size == 0:
            break
        j = int(open_targets[np.argmax(traces[open_targets])])
        grant = min(step, remaining, 1.0 - alpha[j])
        alpha[j] += grant
        remaining -= grant
        traces[j] = evaluate(j)
    return Policy(alpha=alpha, budget=float(budget)), float(traces.max())


# ---------------------------------------------------------------------------
# Swarm search
# ---------------------------------------------------------------------------

@dataclass
class PsoConfig:
    """Tuning knobs for the swarm; defaults suit a handful of targets."""

    particles: int = 30
    beta_local: float = 1.5
    beta_global: float = 1.5
    inertia: float = 0.7
    velocity_clamp: float = 0.25
    log_velocity_clamp: float = 0.5
    threshold: float | None = None
    max_iter: int = 500
    repulsive_update: bool = False
    rate_includes_alpha: bool = True
    init_concentration: float = 8.0
    seed: int = 0


@dataclass
class Particle:
    """One hypothesis: channel rates, noise scales, covariances, and a policy."""

    lam: np.ndarray           # (N,) hypothesized channel success rates
    log_r: np.ndarray         # (N, m) log-diagonal measurement noise
    log_q: np.ndarray         # (N, n) log-diagonal process noise
    alpha: np.ndarray         # (N,) candidate attempt probabilities
    cov: np.ndarray           # (N, n, n) hypothesized covariances
    v_lam: np.ndarray
    v_log_r: np.ndarray
    v_log_q: np.ndarray
    v_alpha: np.ndarray
    best_fitness: float = np.inf
    best_iteration: int = -1
    last_fitness: float = np.inf
    best_lam: np.ndarray = field(default=None, repr=False)
    best_log_r: np.ndarray = field(default=None, repr=False)
    best_log_q: np.ndarray = field(default=None, repr=False)
    best_alpha: np.ndarray = field(default=None, repr=False)

    def traces(self) -> np.ndarray:
        return np.trace(self.cov, axis1=1, axis2=2)

    def snapshot_best(self, fitness_value: float, iteration: int) -> None:
        self.best_fitness = fitness_value
        self.best_iteration = iteration
        self.best_lam = self.lam.copy()
        self.best_log_r = self.log_r.copy()
        self.best_log_q = self.log_q.copy()
        self.best_alpha = self.alpha.copy()


@dataclass
class SwarmState:
    """The particle population plus the running global best."""

    particles: list[Particle]
    models: list[ModelParams]
    floors: np.ndarray
    budget: float
    config: PsoConfig
    best_particle: int = 0
    best_fitness: float = np.inf
    iteration: int = 0
    converged: bool = False

    @property
    def threshold(self) -> float:
        if self.config.threshold is not None:
            return self.config.threshold
        return 1e-3 * len(self.floors)

    def best_alpha(self) -> np.ndarray:
        best = self.particles[self.best_particle]
        alpha = best.best_alpha if best.best_alpha is not None else best.alpha
        return project_alpha(alpha, self.floors, self.budget)


def fitness(particle: Particle, true_traces) -> float:
    """Root-sum-square mismatch between hypothesized and live covariance traces."""
    diff = particle.traces() - np.asarray(true_traces, dtype=float)
    return float(np.sqrt(np.sum(diff ** 2)))


def init_swarm(models: Sequence[ModelParams], budget: float, floors,
               config: PsoConfig, rng: np.random.Generator,
               p0_scale: float = 10.0) -> SwarmState:
    """Draw the particle population.

    Noise hypotheses are log-uniform over [0.01, 100] times the true scales.
    Candidate probability vectors are drawn on the budget simplex around the
    even split (`init_concentration` sets how tightly; 1 recovers the uniform
    simplex draw), since a constrained local search does best starting from
    the feasible centre.  The hypothesized covariances jitter around the
    filters' starting covariance (half a decade each way) so early fitness
    scores reflect the channel and noise hypotheses rather than a lucky
    covariance level.
    """
    models = list(models)
    n_targets = len(models)
    floors = np.asarray(floors, dtype=float)
    if floors.shape != (n_targets,):
        raise ParameterError("floors must have one entry per target")
    if float(floors.sum()) > budget + 1e-9:
        raise InfeasibleError("probability floors exceed the budget",
                              deficit=float(floors.sum()) - budget)
    n, m = models[0].n_states, models[0].n_meas
    r_centers = np.array([np.mean(np.diag(p.R)) for p in models])
    q_centers = np.array([np.mean(np.diag(p.Q)) for p in models])
    r_centers = np.maximum(r_centers, 1e-8)
    q_centers = np.maximum(q_centers, 1e-8)
    span = np.log(100.0)

    concentration = max(config.init_concentration, 1e-3) * np.ones(n_targets)
    particles = []
    for _ in range(config.particles):
        lam = rng.random(n_targets)
        log_r = (np.log(r_centers)[:, None] + rng.uniform(-span, span, (n_targets, m)))
        log_q = (np.log(q_centers)[:, None] + rng.uniform(-span, span, (n_targets, n)))
        alpha = project_alpha(budget * rng.dirichlet(concentration), floors, budget)
        cov = np.stack([np.diag(p0_scale * 10.0 ** rng.uniform(-0.5, 0.5, n))
                        for _ in range(n_targets)])
        particle = Particle(
            lam=lam, log_r=log_r, log_q=log_q, alpha=alpha, cov=cov,
            v_lam=np.zeros(n_targets), v_log_r=np.zeros((n_targets, m)),
            v_log_q=np.zeros((n_targets, n)), v_alpha=np.zeros(n_targets))
        particle.snapshot_best(np.inf, -1)
        particles.append(particle)
    return SwarmState(particles=particles, models=models, floors=floors,
                      budget=float(budget), config=config)


def _advance_covariances(particle: Particle, models: Sequence[ModelParams],
                         rate_includes_alpha: bool) -> None:
    """One covariance-map application per target with the particle's hypotheses."""
    rates = particle.lam * particle.alpha if rate_includes_alpha else particle.lam
    rates = np.clip(rates, 0.0, 1.0)
    for i, params in enumerate(models):
        A, C = params.A, params.C
        P = particle.cov[i]
        out = A @ P @ A.T + np.diag(np.exp(particle.log_q[i]))
        rate = float(rates[i])
        if rate > 0.0:
            S = C @ P @ C.T + np.diag(np.exp(particle.log_r[i]))
            W = A @ P @ C.T
            out = out - rate * (W @ np.linalg.solve(symmetrize(S), W.T))
        particle.cov[i] = symmetrize(out)


def _nudge(value: np.ndarray, velocity: np.ndarray, local: np.ndarray, global_: np.ndarray,
           config: PsoConfig, clamp: float, rng: np.random.Generator) -> None:
    """In-place velocity and position update for one evolved quantity."""
    if config.repulsive_update:
        # sign-flipped variant kept for comparison: pushes away from the bests
        value += (config.beta_local * (value - local)
                  + config.beta_global * (value - global_))
        return
    r_local = rng.random(value.shape)
    r_global = rng.random(value.shape)
    velocity *= config.inertia
    velocity += config.beta_local * r_local * (local - value)
    velocity += config.beta_global * r_global * (global_ - value)
    np.clip(velocity, -clamp, clamp, out=velocity)
    value += velocity


def pso_iterate(swarm: SwarmState, filter_states, rng: np.random.Generator) -> SwarmState:
    """One synchronous swarm iteration against the live filter covariances.

    Advances every particle's hypothesized covariances one slot, refreshes
    local and global bests, then moves every particle toward its own and the
    global best snapshot.  Mutates and returns `swarm`; a converged swarm is
    left untouched.
    """
    if swarm.converged:
        return swarm
    if len(filter_states) and isinstance(filter_states[0], FilterState):
        true_traces = np.array([float(np.trace(fs.P_hat)) for fs in filter_states])
    else:
        true_traces = np.asarray(filter_states, dtype=float)
    cfg = swarm.config
    k = swarm.iteration + 1

    for particle in swarm.particles:
        _advance_covariances(particle, swarm.models, cfg.rate_includes_alpha)
        score = fitness(particle, true_traces)
        particle.last_fitness = score
        if score < particle.best_fitness:
            particle.snapshot_best(score, k)

    best = min(range(len(swarm.particles)),
               key=lambda p: (swarm.particles[p].best_fitness, p))
    swarm.best_particle = best
    swarm.best_fitness = swarm.particles[best].best_fitness
    swarm.iteration = k
    if swarm.best_fitness < swarm.threshold:
        swarm.converged = True
        return swarm

    leader = swarm.particles[best]
    for particle in swarm.particles:
        _nudge(particle.alpha, particle.v_alpha, particle.best_alpha,
               leader.best_alpha, cfg, cfg.velocity_clamp, rng)
        _nudge(particle.lam, particle.v_lam, particle.best_lam,
               leader.best_lam, cfg, cfg.velocity_clamp, rng)
        _nudge(particle.log_r, particle.v_log_r, particle.best_log_r,
               leader.best_log_r, cfg, cfg.log_velocity_clamp, rng)
        _nudge(particle.log_q, particle.v_log_q, particle.best_log_q,
               leader.best_log_q, cfg, cfg.log_velocity_clamp, rng)
        particle.alpha = project_alpha(particle.alpha, swarm.floors, swarm.budget)
        np.clip(particle.lam, 0.0, 1.0, out=particle.lam)
        np.clip(particle.log_r, -_LOG_BOUND, _LOG_BOUND, out=particle.log_r)
        np.clip(particle.log_q, -_LOG_BOUND, _LOG_BOUND, out=particle.log_q)
    return swarm


def optimize(scenario, pso_config: PsoConfig | None = None):
    """Run the interleaved filter/swarm loop on a scenario.

    Returns the best probability vector found (projected to the constraint
    set) together with the per-iteration log of every particle's policy and
    fitness.  Deterministic given the scenario seed and the swarm seed.
    """
    from . import sim  # local import; sim orchestrates, policy supplies the math

    cfg = replace(scenario, policy_mode="pso")
    if pso_config is not None:
        cfg = replace(cfg, pso=pso_config)
    log = sim.run_scenario(cfg)
    return log.policy, log.swarm_log
