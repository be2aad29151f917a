"""Independent brute-force oracles used to freeze expected values.

These deliberately avoid the solver/simulator code paths they check: dense
grid search for the fractional width problem, exhaustive enumeration for
integer plans and glue configurations, and direct formula evaluation for the
rescale-aware closed forms.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from gpurent.optimizer import WidthPlan
from gpurent.workload import WorkloadSpec, compute_loads


def grid_solve(terms, budget, step=0.01):
    """Dense-grid brute force for min sum rho/s(k) s.t. sum rho*k/s(k) <= budget.

    terms: list of (rho, hull). Supports 1-3 terms. Returns (objective, ks).
    """
    grids = []
    for rho, hull in terms:
        ks = np.arange(1.0, hull.saturation_width + step / 2, step)
        ss = np.interp(ks, hull.ks, hull.ss)
        grids.append((ks, rho / ss, rho * ks / ss))
    if len(terms) == 1:
        ks, z, w = grids[0]
        feas = w <= budget
        if not feas.any():
            raise ValueError("no feasible grid point")
        i = int(np.argmin(np.where(feas, z, np.inf)))
        return float(z[i]), (float(ks[i]),)
    if len(terms) == 2:
        (k1, z1, w1), (k2, z2, w2) = grids
        Z = z1[:, None] + z2[None, :]
        W = w1[:, None] + w2[None, :]
        Z = np.where(W <= budget, Z, np.inf)
        i, j = np.unravel_index(int(np.argmin(Z)), Z.shape)
        if not np.isfinite(Z[i, j]):
            raise ValueError("no feasible grid point")
        return float(Z[i, j]), (float(k1[i]), float(k2[j]))
    if len(terms) == 3:
        (k1, z1, w1), (k2, z2, w2), (k3, z3, w3) = grids
        best = math.inf
        arg = None
        Z23 = z2[:, None] + z3[None, :]
        W23 = w2[:, None] + w3[None, :]
        for i in range(len(k1)):
            Z = np.where(W23 + w1[i] <= budget, Z23 + z1[i], np.inf)
            jk = int(np.argmin(Z))
            v = float(Z.flat[jk])
            if v < best:
                best = v
                j, k = np.unravel_index(jk, Z.shape)
                arg = (float(k1[i]), float(k2[j]), float(k3[k]))
        if arg is None:
            raise ValueError("no feasible grid point")
        return best, arg
    raise ValueError("grid oracle supports at most 3 terms")


def eval_fixed_width(workload: WorkloadSpec, widths: dict, include_rescale: bool):
    """Direct evaluation of the rescale-aware closed forms, independent of analytic_eval."""
    lam = workload.total_rate
    jct = 0.0
    cost = 0.0
    for c in workload.classes:
        prev = None
        for j, ep in enumerate(c.epochs):
            k = widths[(c.class_id, j)]
            s = ep.hull.eval(k)
            t_run = ep.mean_size / s
            jct += c.arrival_rate * t_run
            cost += c.arrival_rate * k * t_run
            if include_rescale and (j == 0 or k != prev):
                jct += c.arrival_rate * c.rescale_mean
                cost += c.arrival_rate * k * c.rescale_mean
            prev = k
    return jct / lam, cost


def enumerate_integer_plans(workload: WorkloadSpec, budget: float, include_rescale: bool = True):
    """Exhaustively enumerate integer width plans with cost <= budget; min mean JCT.

    Returns (mean_jct, widths dict). Intended for tiny instances only.
    """
    keys = workload.class_epoch_pairs()
    ranges = [range(1, int(workload.hull(*key).saturation_width) + 1) for key in keys]
    best = (math.inf, None)
    for combo in itertools.product(*ranges):
        widths = {key: float(k) for key, k in zip(keys, combo)}
        jct, cost = eval_fixed_width(workload, widths, include_rescale)
        if cost <= budget and jct < best[0]:
            best = (jct, widths)
    if best[1] is None:
        raise ValueError("no feasible integer plan")
    return best


def heterogeneous_brute_force(workload: WorkloadSpec, types, budget: float, p_step: float = 0.1):
    """Exhaustive (p, integer k per type) search for the 2-type heterogeneous problem."""
    assert len(types) == 2
    loads = compute_loads(workload)
    keys = workload.class_epoch_pairs()
    options_per_key = []
    for key in keys:
        opts = []
        hullA, hullB = types[0].hulls[key], types[1].hulls[key]
        kAs = range(1, int(hullA.saturation_width) + 1)
        kBs = range(1, int(hullB.saturation_width) + 1)
        ps = [round(i * p_step, 10) for i in range(int(round(1 / p_step)) + 1)]
        rho = loads.per_epoch[key]
        for p_a in ps:
            for kA in kAs:
                for kB in kBs:
                    sA, sB = hullA.eval(kA), hullB.eval(kB)
                    jct = p_a * rho / sA + (1 - p_a) * rho / sB
                    cost = (
                        types[0].cost_per_hour * p_a * rho * kA / sA
                        + types[1].cost_per_hour * (1 - p_a) * rho * kB / sB
                    )
                    opts.append((jct, cost, (p_a, kA, kB)))
        options_per_key.append(opts)
    best = (math.inf, None)
    for combo in itertools.product(*options_per_key):
        cost = sum(o[1] for o in combo)
        if cost <= budget:
            jct = sum(o[0] for o in combo)
            if jct < best[0]:
                best = (jct, tuple(o[2] for o in combo))
    if best[1] is None:
        raise ValueError("no feasible point")
    return best


def waterfill_efficiency_search(hull, c: float, k_lo: int, k_hi: int):
    """Exhaustive single-job oracle: the cluster size whose efficiency is closest to c."""
    best_k, best_gap = None, math.inf
    for k in range(k_lo, k_hi + 1):
        s = hull.eval(min(float(k), hull.saturation_width))
        gap = abs(s / k - c)
        if gap < best_gap:
            best_k, best_gap = k, gap
    return best_k


def check_least_monotone_concave_majorant(points, hull, grid_step=0.01):
    """Verify hull is the minimal non-decreasing concave majorant of the points.

    Domination and shape are checked directly; minimality follows from every
    breakpoint coinciding with an input point (lowering any value by
    grid_step then breaks domination there or the shape constraints on a
    dense grid).
    """
    pts = dict(points)
    for k, s in points:
        assert hull.eval(float(k)) >= s - 1e-12, f"hull fails to dominate point ({k}, {s})"
    ss = hull.ss
    assert all(b > a for a, b in zip(ss, ss[1:])), "hull speedups not increasing"
    slopes = [(s1 - s0) / (k1 - k0) for (k0, s0), (k1, s1) in zip(zip(hull.ks, ss), zip(hull.ks[1:], ss[1:]))]
    assert all(b <= a + 1e-12 for a, b in zip(slopes, slopes[1:])), "hull not concave"
    for k, s in zip(hull.ks, ss):
        assert k in pts and abs(pts[k] - s) <= 1e-12, (
            f"breakpoint ({k}, {s}) is not an input point; hull not minimal"
        )
    # grid sanity: lowering the hull at any breakpoint by grid_step breaks something
    for i in range(len(ss)):
        lowered = list(ss)
        lowered[i] -= grid_step
        dominates = all(np.interp(k, hull.ks, lowered) >= s - 1e-12 for k, s in points)
        assert not dominates, f"lowered hull at breakpoint {i} still dominates; not minimal"


def make_plan(widths: dict, kind: str = "fractional") -> WidthPlan:
    return WidthPlan(widths=dict(widths), plan_kind=kind, run_budget=0.0)
