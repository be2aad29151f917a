"""CSV writers and optional matplotlib figure rendering for the CLI report paths."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .simulator import CompareRow

FRONTIER_COLUMNS = [
    "budget",
    "status",
    "analytic_mean_jct",
    "sim_mean_jct",
    "sim_p95_jct",
    "time_avg_usage",
]

COMPARE_COLUMNS = ["policy", "param", "mean_jct", "p95_jct", "time_avg_usage"]


@dataclass
class FrontierRow:
    """One budget on the cost-performance frontier."""

    budget: float
    status: str  # ok | infeasible
    analytic_mean_jct: float | None = None
    sim_mean_jct: float | None = None
    sim_p95_jct: float | None = None
    time_avg_usage: float | None = None


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def write_frontier_csv(rows: list[FrontierRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FRONTIER_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    f"{r.budget:.6f}",
                    r.status,
                    _fmt(r.analytic_mean_jct),
                    _fmt(r.sim_mean_jct),
                    _fmt(r.sim_p95_jct),
                    _fmt(r.time_avg_usage),
                ]
            )


def write_compare_csv(rows: list[CompareRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARE_COLUMNS)
        for r in rows:
            w.writerow(
                [r.policy, f"{r.budget_param:.6f}", f"{r.mean_jct:.6f}", f"{r.p95_jct:.6f}", f"{r.time_avg_usage:.6f}"]
            )


def render_frontier_figure(rows: list[FrontierRow], path) -> None:
    """Mean JCT vs operating budget, analytic and simulated curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [r for r in rows if r.status == "ok"]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot([r.budget for r in ok], [r.analytic_mean_jct for r in ok], "o-", label="analytic")
    ax.plot([r.budget for r in ok], [r.sim_mean_jct for r in ok], "s--", label="simulated")
    ax.set_xlabel("operating budget (time-average GPUs)")
    ax.set_ylabel("mean JCT (s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_compare_figure(rows: list[CompareRow], path) -> None:
    """Mean JCT vs realized usage, one marker set per policy."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for kind, marker in (("fixed_width", "o"), ("efficiency_target", "^")):
        pts = [(r.time_avg_usage, r.mean_jct) for r in rows if r.policy == kind]
        if pts:
            xs, ys = zip(*sorted(pts))
            ax.plot(xs, ys, marker + "-", label=kind)
    ax.set_xlabel("time-average GPU usage")
    ax.set_ylabel("mean JCT (s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
