"""Figure rendering for the report path.

Each helper draws one figure from already-computed rows and writes it to a
file; the delimited output stays the canonical record and these renderings
sit alongside it for quick inspection.  The Agg backend is forced so the
package never needs a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_FIGSIZE = (7.0, 4.2)
_DPI = 120


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def mse_over_time(runs, path) -> Path:
    """One line per run: aggregate error against the slot index."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for label, slots, mse in runs:
        ax.plot(slots, mse, linewidth=1.2, label=label)
    ax.set_xlabel("time slot")
    ax.set_ylabel("mean squared error")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, Path(path))


def alpha_trajectories(swarm_rows, path) -> Path:
    """Per-target attempt probabilities of the leading particle over iterations."""
    if not swarm_rows:
        raise ValueError("empty swarm log")
    best = swarm_rows[-1]["global_best"]
    series: dict[int, list[tuple[int, float]]] = {}
    for row in swarm_rows:
        if row["particle"] == best:
            series.setdefault(row["target"], []).append((row["iteration"], row["alpha"]))
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for target in sorted(series):
        pts = sorted(series[target])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], linewidth=1.2,
                label=f"target {target}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("attempt probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, Path(path))


def pattern_costs(rows, path) -> Path:
    """Mean accumulated covariance trace per pattern variant, with spread."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    labels = [r["variant"] for r in rows]
    means = [r["mean_cost"] for r in rows]
    stds = [r["std_cost"] for r in rows]
    ax.bar(labels, means, yerr=stds, capsize=4, color="#4878a8")
    ax.set_ylabel("accumulated covariance trace")
    ax.grid(True, axis="y", alpha=0.3)
    return _finish(fig, Path(path))


def mse_vs_lambda(rows, path) -> Path:
    """Run-mean error against the channel arrival rate."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    lams = [r["lambda"] for r in rows]
    ax.plot(lams, [r["mean_mse"] for r in rows], "o-", label="full state")
    ax.plot(lams, [r["mean_pos_mse"] for r in rows], "s--", label="position only")
    ax.set_xlabel("arrival probability")
    ax.set_ylabel("mean squared error")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, Path(path))
