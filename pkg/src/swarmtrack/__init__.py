"""Tracking-resource allocation for UAV swarms under lossy measurement channels.

The package simulates constant-velocity targets observed through Bernoulli
channels, filters them with a missing-measurement Kalman filter, analyses
the expected steady-state error covariance, searches for good per-target
measurement probabilities, and compiles those probabilities into concrete
time-slot schedules.
"""

from .errors import ConfigError, InfeasibleError, NumericalError, ParameterError
from .kalman import FilterState, StepReport, initial_state, measurement_update, step, time_update
from .model import (ModelParams, Observation, Trajectory, TrajectoryConfig,
                    default_model, generate_trajectory, observe, step_truth)
from .policy import (Particle, Policy, PsoConfig, SwarmState, fitness, init_swarm,
                     minimax_allocate, optimize, pso_iterate, water_fill)
from .riccati import (MareProblem, MareSolution, estimate_critical_lambda,
                      expected_error_trace, mare_operator, solve_fixed_point)
from .schedule import Schedule, compile_schedule, euclidean_pattern, pattern_cost
from .sim import MetricsLog, ScenarioConfig, compare_patterns, run_scenario, sweep_lambda

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InfeasibleError", "NumericalError", "ParameterError",
    "FilterState", "StepReport", "initial_state", "measurement_update", "step", "time_update",
    "ModelParams", "Observation", "Trajectory", "TrajectoryConfig",
    "default_model", "generate_trajectory", "observe", "step_truth",
    "Particle", "Policy", "PsoConfig", "SwarmState", "fitness", "init_swarm",
    "minimax_allocate", "optimize", "pso_iterate", "water_fill",
    "MareProblem", "MareSolution", "estimate_critical_lambda",
    "expected_error_trace", "mare_operator", "solve_fixed_point",
    "Schedule", "compile_schedule", "euclidean_pattern", "pattern_cost",
    "MetricsLog", "ScenarioConfig", "compare_patterns", "run_scenario", "sweep_lambda",
    "__version__",
]
