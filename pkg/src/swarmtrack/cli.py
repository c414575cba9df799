"""Command-line front end: JSON configs in, CSV/JSON results and figures out.

Subcommands: simulate, optimize, mare, schedule, compare-patterns,
sweep-lambda.  Every file-writing command drops a manifest next to its
outputs; feeding that manifest back in reproduces the run byte for byte.
Exit codes: 0 success, 2 malformed configuration, 3 infeasible allocation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, plots
from .errors import ConfigError, InfeasibleError, ParameterError
from .model import default_model
from .policy import Policy, PsoConfig
from .riccati import MareProblem, estimate_critical_lambda, solve_fixed_point
from .schedule import compile_schedule
from .sim import (METRIC_COLUMNS, SWARM_COLUMNS, ScenarioConfig, compare_patterns,
                  run_scenario, sweep_lambda)
from .tabular import write_csv, write_matrix_csv

SEED_ENV = "SWARMTRACK_SEED"

SCENARIO_KEYS = {
    "schema", "name", "notes", "targets", "instruments", "horizon", "cycle_slots",
    "dt", "q_scale", "r_scale", "lambda", "accel_var", "input_mode", "p0_scale",
    "init_mode", "policy_mode", "alpha", "seed", "lambda_c_floor", "lambda_grid",
    "policies", "pso",
}
PSO_KEYS = {
    "particles", "beta_local", "beta_global", "inertia", "velocity_clamp",
    "log_velocity_clamp", "threshold", "max_iter", "repulsive_update",
    "rate_includes_alpha", "seed",
}
PATTERN_KEYS = {
    "schema", "name", "notes", "alpha", "cycle_slots", "dt", "q_scale", "r_scale",
    "lambda", "replicates", "seed", "p0_exponent_range",
}

SUMMARY_COLUMNS = ("label", "policy_mode", "lambda", "seed",
                   "mean_mse", "mean_pos_mse", "mean_trace", "accumulated_trace")


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "command" in doc and "config" in doc:
        doc = doc["config"]  # a manifest; re-run its resolved configuration
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: manifest field 'config' must be an object")
    return doc


def _validate_keys(doc: dict, allowed: set, path: str, where: str = "") -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown field{'s' if len(unknown) > 1 else ''} "
                          f"{', '.join(unknown)}{where}")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}: missing required field '{key}'")
    return doc[key]


def load_config(path: str, allowed: set) -> dict:
    doc = _load_json(path)
    _validate_keys(doc, allowed, path)
    if _require(doc, "schema", path) != 1:
        raise ConfigError(f"{path}: field 'schema' must be 1, got {doc['schema']!r}")
    if "pso" in doc and doc["pso"] is not None:
        if not isinstance(doc["pso"], dict):
            raise ConfigError(f"{path}: field 'pso' must be an object")
        _validate_keys(doc["pso"], PSO_KEYS, path, " (in 'pso')")
    return doc


def _resolve_seed(doc: dict) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"environment variable {SEED_ENV} must be an integer, got {env!r}")
    return int(doc.get("seed", 0))


def pso_from_config(doc: dict | None) -> PsoConfig:
    if not doc:
        return PsoConfig()
    return PsoConfig(**doc)


def scenario_from_config(doc: dict, path: str) -> ScenarioConfig:
    try:
        model = default_model(dt=float(doc.get("dt", 0.1)),
                              q_scale=float(doc.get("q_scale", 0.1)),
                              r_scale=float(doc.get("r_scale", 10.0)))
        return ScenarioConfig(
            n_targets=int(_require(doc, "targets", path)),
            instruments=int(_require(doc, "instruments", path)),
            horizon=int(_require(doc, "horizon", path)),
            cycle_slots=int(doc.get("cycle_slots", 10)),
            model=model,
            lambdas=doc.get("lambda", 1.0),
            policy_mode=doc.get("policy_mode", "uniform"),
            alpha=doc.get("alpha"),
            seed=_resolve_seed(doc),
            input_mode=doc.get("input_mode", "white_noise"),
            accel_var=float(doc.get("accel_var", 100.0)),
            p0_scale=float(doc.get("p0_scale", 10.0)),
            init_mode=doc.get("init_mode", "first_fix"),
            lambda_c_floor=float(doc.get("lambda_c_floor", 0.0)),
            pso=pso_from_config(doc.get("pso")),
        )
    except (ParameterError, TypeError, ValueError) as exc:
        if isinstance(exc, InfeasibleError):
            raise
        raise ConfigError(f"{path}: {exc}")


def _resolved_config(doc: dict, seed: int) -> dict:
    resolved = dict(doc)
    resolved["seed"] = seed
    return resolved


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    outputs: list[Path], started: float) -> Path:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "schema": 1,
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "runtime_seconds": round(time.time() - started, 3),
        "outputs": sorted(p.name for p in outputs),
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _fan_out(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    started = time.time()
    doc = load_config(args.config, SCENARIO_KEYS)
    base = scenario_from_config(doc, args.config)
    out = _out_dir(args)

    grid = doc.get("lambda_grid")
    lambda_values = [None] if grid is None else [float(v) for v in grid]
    policies = doc.get("policies") or [doc.get("policy_mode", "uniform")]

    specs = []
    for lam in lambda_values:
        draw = 0
        for mode in policies:
            scen = base
            if lam is not None:
                scen = replace(scen, lambdas=lam)
            if mode == "random":
                scen = replace(scen, policy_mode="random", policy_draw=draw)
                draw += 1
            else:
                scen = replace(scen, policy_mode=mode)
            label = mode if mode != "random" else f"random{scen.policy_draw}"
            if lam is not None:
                label = f"{label}_lam{lam:g}"
            specs.append((label, scen, lam))

    logs = _fan_out(lambda spec: run_scenario(spec[1]), specs, args.threads)

    outputs = []
    summary_rows = []
    curves = []
    for (label, scen, lam), log in zip(specs, logs):
        metrics_path = out / f"metrics_{label}.csv"
        write_csv(metrics_path, METRIC_COLUMNS, log.rows())
        outputs.append(metrics_path)
        lam_col = lam if lam is not None else float(np.mean(scen.lambda_vector()))
        summary_rows.append((label, scen.policy_mode, lam_col, scen.seed,
                             log.summary["mean_mse"], log.summary["mean_pos_mse"],
                             log.summary["mean_trace"], log.summary["accumulated_trace"]))
        slots, mse = log.mse_by_slot()
        curves.append((label, slots, mse))
    summary_path = out / "summary.csv"
    write_csv(summary_path, SUMMARY_COLUMNS, summary_rows)
    outputs.append(summary_path)

    if args.plot:
        outputs.append(plots.mse_over_time(curves, out / "mse_per_slot.png"))
    _write_manifest(out, "simulate", _resolved_config(doc, base.seed), base.seed,
                    outputs, started)
    return 0


def cmd_optimize(args) -> int:
    started = time.time()
    doc = load_config(args.config, SCENARIO_KEYS)
    base = scenario_from_config(doc, args.config)
    out = _out_dir(args)

    scen = replace(base, policy_mode="pso")
    log = run_scenario(scen)
    outputs = []

    swarm_path = out / "swarm.csv"
    write_csv(swarm_path, SWARM_COLUMNS,
              (tuple(row[c] for c in SWARM_COLUMNS) for row in log.swarm_log))
    outputs.append(swarm_path)

    policy_path = out / "policy.json"
    policy_path.write_text(json.dumps(
        {"alpha": [float(a) for a in log.policy.alpha], "budget": log.policy.budget},
        indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs.append(policy_path)

    if args.plot:
        outputs.append(plots.alpha_trajectories(log.swarm_log, out / "alpha_trajectories.png"))
    _write_manifest(out, "optimize", _resolved_config(doc, scen.seed), scen.seed,
                    outputs, started)
    return 0


def _parse_matrix(text: str, name: str) -> np.ndarray:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--{name}: {exc.msg}")
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ConfigError(f"--{name}: expected a scalar or a 2-D matrix")
    return arr


def cmd_mare(args) -> int:
    started = time.time()
    A = _parse_matrix(args.a, "a")
    C = _parse_matrix(args.c, "c")
    Q = _parse_matrix(args.q, "q")
    R = _parse_matrix(args.r, "r")
    if not 0.0 <= args.lam <= 1.0:
        raise ConfigError(f"--lam must lie in [0, 1], got {args.lam}")
    problem = MareProblem(A=A, C=C, Q=Q, R=R, lam=args.lam)
    P0 = _parse_matrix(args.p0, "p0") if args.p0 is not None else None
    solution = solve_fixed_point(problem, P0=P0, tol=args.tol, max_iter=args.max_iter)
    lo, hi = estimate_critical_lambda(A, C, Q, R, tol=args.bracket_tol,
                                      max_iter=args.max_iter)
    report = {
        "fixed_point": [[float(v) for v in row] for row in solution.P_star],
        "converged": solution.converged,
        "diverged": solution.diverged,
        "iterations": solution.iterations,
        "residual": solution.residual,
        "critical_lambda": {"lower": lo, "upper": hi},
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out_dir is not None:
        out = _out_dir(args)
        path = out / "mare.json"
        path.write_text(text + "\n", encoding="utf-8")
        config = {"schema": 1, "a": args.a, "c": args.c, "q": args.q, "r": args.r,
                  "lam": args.lam, "tol": args.tol, "p0": args.p0,
                  "bracket_tol": args.bracket_tol, "max_iter": args.max_iter}
        _write_manifest(out, "mare", config, 0, [path], started)
    return 0


SCHEDULE_KEYS = {"schema", "name", "notes", "alpha", "slots", "capacity"}


def cmd_schedule(args) -> int:
    started = time.time()
    if args.config is not None:
        doc = load_config(args.config, SCHEDULE_KEYS)
        alpha = [float(v) for v in _require(doc, "alpha", args.config)]
        slots = int(_require(doc, "slots", args.config))
        capacity = doc.get("capacity")
    else:
        if args.alpha is None or args.slots is None:
            raise ConfigError("schedule needs either a config file or --alpha and --slots")
        try:
            alpha = [float(v) for v in args.alpha.split(",") if v.strip() != ""]
        except ValueError:
            raise ConfigError(f"--alpha must be a comma-separated list of numbers, got {args.alpha!r}")
        slots = args.slots
        capacity = args.capacity
    if not alpha:
        raise ConfigError("the probability list must name at least one target")
    if capacity is None:
        capacity = max(1, int(np.ceil(sum(alpha) - 1e-9)))
    policy = Policy(alpha=np.asarray(alpha), budget=float(capacity))
    sched = compile_schedule(policy, slots, capacity=int(capacity))
    out = _out_dir(args)
    path = out / "schedule.csv"
    write_matrix_csv(path, sched.B)
    config = {"schema": 1, "alpha": alpha, "slots": slots, "capacity": int(capacity)}
    _write_manifest(out, "schedule", config, 0, [path], started)
    return 0


def cmd_compare_patterns(args) -> int:
    started = time.time()
    doc = load_config(args.config, PATTERN_KEYS)
    seed = _resolve_seed(doc)
    T = int(doc.get("cycle_slots", 20))
    scen = ScenarioConfig(
        n_targets=1, instruments=1, horizon=T, cycle_slots=T,
        model=default_model(dt=float(doc.get("dt", 0.1)),
                            q_scale=float(doc.get("q_scale", 0.1)),
                            r_scale=float(doc.get("r_scale", 10.0))),
        lambdas=float(doc.get("lambda", 1.0)), policy_mode="uniform", seed=seed)
    exponent_range = tuple(doc.get("p0_exponent_range", (-1.0, 2.0)))
    replicates = int(doc.get("replicates", 100))
    rows = compare_patterns(scen, alpha=float(doc.get("alpha", 0.5)),
                            replicates=replicates, exponent_range=exponent_range)

    out = _out_dir(args)
    outputs = []
    table = out / "patterns.csv"
    write_csv(table, ("variant", "mean_cost", "std_cost", "min_cost", "max_cost", "replicates"),
              [(r["variant"], r["mean_cost"], r["std_cost"], r["min_cost"],
                r["max_cost"], r["replicates"]) for r in rows])
    outputs.append(table)
    if args.plot:
        outputs.append(plots.pattern_costs(rows, out / "pattern_costs.png"))
    _write_manifest(out, "compare-patterns", _resolved_config(doc, seed), seed,
                    outputs, started)
    return 0


def cmd_sweep_lambda(args) -> int:
    started = time.time()
    doc = load_config(args.config, SCENARIO_KEYS)
    base = scenario_from_config(doc, args.config)
    grid = doc.get("lambda_grid")
    if not grid:
        raise ConfigError(f"{args.config}: sweep-lambda needs a non-empty 'lambda_grid'")
    out = _out_dir(args)

    results = _fan_out(lambda lam: sweep_lambda(base, [lam])[0],
                       [float(v) for v in grid], args.threads)
    table = out / "sweep.csv"
    write_csv(table, ("lambda", "mean_mse", "mean_pos_mse", "mean_trace", "accumulated_trace"),
              [(r["lambda"], r["mean_mse"], r["mean_pos_mse"], r["mean_trace"],
                r["accumulated_trace"]) for r in results])
    outputs = [table]
    if args.plot:
        outputs.append(plots.mse_vs_lambda(results, out / "mse_vs_lambda.png"))
    _write_manifest(out, "sweep-lambda", _resolved_config(doc, base.seed), base.seed,
                    outputs, started)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmtrack",
        description="Tracking-resource allocation and intermittent-filter experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config: bool = True, out_required: bool = True):
        if config:
            p.add_argument("config", help="JSON configuration (or a previous manifest)")
        p.add_argument("--out-dir", required=out_required, help="directory for outputs")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel fan-out of independent runs (default 1)")
        p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                       help="render figures alongside the CSV output")

    p = sub.add_parser("simulate", help="run a scenario and log metrics")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="search for attempt probabilities with the swarm")
    add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("mare", help="fixed point and critical rate of the covariance map")
    p.add_argument("--a", required=True, help="dynamics matrix (scalar or JSON matrix)")
    p.add_argument("--c", required=True, help="readout matrix (scalar or JSON matrix)")
    p.add_argument("--q", required=True, help="process noise covariance")
    p.add_argument("--r", required=True, help="measurement noise covariance")
    p.add_argument("--lam", type=float, required=True, help="arrival probability")
    p.add_argument("--tol", type=float, default=1e-9, help="fixed-point tolerance")
    p.add_argument("--p0", default=None, help="starting covariance (default Q)")
    p.add_argument("--bracket-tol", type=float, default=0.02,
                   help="width of the critical-rate bracket")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--out-dir", default=None, help="also write the report to a directory")
    p.set_defaults(func=cmd_mare)

    p = sub.add_parser("schedule", help="compile attempt probabilities into a slot matrix")
    p.add_argument("config", nargs="?", default=None,
                   help="JSON configuration or a previous manifest (alternative to flags)")
    p.add_argument("--alpha", default=None, help="comma-separated attempt probabilities")
    p.add_argument("--slots", type=int, default=None, help="cycle length in slots")
    p.add_argument("--capacity", type=int, default=None,
                   help="instruments per slot (default: smallest feasible)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("compare-patterns", help="front / back / even pattern costs")
    add_common(p)
    p.set_defaults(func=cmd_compare_patterns)

    p = sub.add_parser("sweep-lambda", help="run the scenario across channel rates")
    add_common(p)
    p.set_defaults(func=cmd_sweep_lambda)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
