"""Budget-constrained width optimization for fixed-width allocation policies.

Solves

    minimize    sum_ij rho_ij / s_ij(k_ij)
    subject to  sum_ij rho_ij * k_ij / s_ij(k_ij) <= b,   1 <= k_ij <= xi_ij

exactly for piecewise-linear concave hulls. The change of variables
z = 1/s(k) makes the problem convex and separable under a Lagrangian dual
on the budget constraint: for a fixed multiplier mu, each (class, epoch)
term minimizes z * (1 + mu * k(z)) independently, and on every linear hull
segment both the objective rho*z and the budget term rho*k*z are linear in
z, so the per-term minimum sits at a hull breakpoint. An outer bisection on
mu brackets the critical multiplier; the residual budget is then filled
exactly along the tied marginal-rate segments (fractional width on a
segment, or an assignment-fraction split across GPU types), which is what
makes the returned budget tight to floating-point precision.

The heterogeneous variant (per-GPU-type hulls and prices) uses the same
machinery with per-type candidate tables and hourly costs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FeasibilityError, PlanCoverageError
from .speedup import ConcaveHull
from .workload import WorkloadSpec, compute_loads

__all__ = [
    "WidthPlan",
    "PlanEvaluation",
    "GpuTypeSpec",
    "HeterogeneousPlan",
    "KktReport",
    "analytic_eval",
    "solve_boa",
    "solve_heterogeneous",
    "evaluate_heterogeneous",
    "kkt_check",
    "read_plan",
    "write_plan",
]


@dataclass
class WidthPlan:
    """Per-(class, epoch) GPU widths, the glue configuration behind them, and budgets."""

    widths: dict[tuple[str, int], float]
    plan_kind: str = "fractional"  # fractional | integer
    run_budget: float = 0.0  # budget handed to the pure solver
    budget: float | None = None  # target cap the plan was computed for
    glue: dict[str, int] = field(default_factory=dict)

    def width(self, class_id: str, epoch: int) -> float:
        return self.widths[(class_id, epoch)]

    def glue_for(self, class_id: str) -> int:
        return self.glue.get(class_id, 1)


@dataclass
class PlanEvaluation:
    """Closed-form mean JCT and operating budget of a fixed-width plan."""

    mean_jct: float
    budget: float
    per_class_jct: dict[str, float]
    rescale_count: dict[str, int]


@dataclass(frozen=True)
class GpuTypeSpec:
    """One GPU type: hourly price and per-(class, epoch) speedup hulls."""

    type_id: str
    cost_per_hour: float
    hulls: dict[tuple[str, int], ConcaveHull]

    def __post_init__(self):
        if not self.cost_per_hour > 0.0:
            raise ValueError(f"type {self.type_id}: cost_per_hour must be positive")


@dataclass
class HeterogeneousPlan:
    """Per (class, epoch): assignment fractions and widths across GPU types."""

    assignments: dict[tuple[str, int], tuple[tuple[str, float, float], ...]]
    # key -> ((type_id, width, fraction), ...) with fractions summing to 1

    def fraction(self, class_id: str, epoch: int, type_id: str) -> float:
        return sum(p for tid, _, p in self.assignments[(class_id, epoch)] if tid == type_id)


# ---------------------------------------------------------------------------
# Core separable solver
# ---------------------------------------------------------------------------


class _TypeTable:
    """Breakpoint candidate table for one (term, GPU type)."""

    __slots__ = ("cost", "hull", "k", "s", "z", "w", "j")

    def __init__(self, rho: float, cost: float, hull: ConcaveHull):
        self.cost = cost
        self.hull = hull
        self.k = np.asarray(hull.ks, dtype=float)
        self.s = np.asarray(hull.ss, dtype=float)
        self.z = 1.0 / self.s
        self.w = rho * cost * self.k / self.s  # budget contribution
        self.j = rho * self.z  # objective contribution


class _Term:
    __slots__ = ("key", "rho", "types")

    def __init__(self, key, rho: float, typed_hulls: list[tuple[float, ConcaveHull]]):
        self.key = key
        self.rho = rho
        self.types = [_TypeTable(rho, cost, hull) for cost, hull in typed_hulls]


def _best_choice(term: _Term, mu: float) -> tuple[int, int]:
    """argmin over (type, breakpoint) of z*(1 + mu*cost*k); ties prefer lower budget, then input order and smaller k."""
    best = None
    best_f = best_w = math.inf
    for hi, tt in enumerate(term.types):
        f = tt.z * (1.0 + mu * tt.cost * tt.k)
        t = int(np.argmin(f))  # first minimum = smallest k within the type
        fv, wv = float(f[t]), float(tt.w[t])
        if fv < best_f or (fv == best_f and wv < best_w):
            best, best_f, best_w = (hi, t), fv, wv
    return best


def _min_cost_choice(term: _Term) -> tuple[int, int]:
    """Cheapest candidate regardless of JCT (the mu -> infinity limit)."""
    best = None
    best_w = best_j = math.inf
    for hi, tt in enumerate(term.types):
        t = int(np.argmin(tt.w))
        wv, jv = float(tt.w[t]), float(tt.j[t])
        if wv < best_w or (wv == best_w and jv < best_j):
            best, best_w, best_j = (hi, t), wv, jv
    return best


def _choices_at(terms: list[_Term], mu: float) -> tuple[list[tuple[int, int]], float]:
    choices = [_best_choice(term, mu) for term in terms]
    spent = sum(term.types[h].w[t] for term, (h, t) in zip(terms, choices))
    return choices, float(spent)


def _segment_width(tt: _TypeTable, t: int, z_star: float) -> float:
    """Width on hull segment [t, t+1] whose speedup is 1/z_star."""
    c = (tt.s[t + 1] - tt.s[t]) / (tt.k[t + 1] - tt.k[t])
    a = tt.s[t] - c * tt.k[t]
    return float((1.0 / z_star - a) / c)

def _solve_terms(terms: list[_Term], budget: float, max_bisect: int = 200):
    """Exact solve of the separable budgeted problem.

    Returns (allocations, info): allocations[i] is a list of
    (type_idx, width, fraction) entries summing to fraction 1.
    """
    choices0, spent0 = _choices_at(terms, 0.0)
    if spent0 <= budget:
        alloc = [[(h, float(term.types[h].k[t]), 1.0)] for term, (h, t) in zip(terms, choices0)]
        return alloc, {"binding": False, "mu": 0.0, "spent": spent0}

    choices_min = [_min_cost_choice(term) for term in terms]
    spent_min = sum(term.types[h].w[t] for term, (h, t) in zip(terms, choices_min))
    if budget <= spent_min * (1.0 + 1e-12):
        raise FeasibilityError(
            f"budget {budget:.9g} cannot cover the minimum feasible cost {spent_min:.9g}",
            required=float(spent_min),
            budget=budget,
        )

    mu_hi = 1.0
    for _ in range(200):
        choices_hi, spent_hi = _choices_at(terms, mu_hi)
        if spent_hi <= budget:
            break
        mu_hi *= 2.0
    else:  # pragma: no cover - spent(mu) -> spent_min < budget
        raise RuntimeError("failed to bracket the dual multiplier")

    mu_lo, choices_lo = 0.0, choices0
    for _ in range(max_bisect):
        if mu_hi - mu_lo <= 1e-15 * mu_hi:
            break
        mid = 0.5 * (mu_lo + mu_hi)
        cmid, smid = _choices_at(terms, mid)
        if smid > budget:
            mu_lo, choices_lo = mid, cmid
        else:
            mu_hi, choices_hi, spent_hi = mid, cmid, smid

    # Fill the residual budget along the tied segments, best marginal rate first.
    alloc = [[(h, float(term.types[h].k[t]), 1.0)] for term, (h, t) in zip(terms, choices_hi)]
    steps = []  # (rate, term_idx, order, action)
    for ti, term in enumerate(terms):
        h1, t1 = choices_hi[ti]
        h0, t0 = choices_lo[ti]
        if (h1, t1) == (h0, t0):
            continue
        if h1 == h0:
            tt = term.types[h1]
            for t in range(t1, t0):
                dw = float(tt.w[t + 1] - tt.w[t])
                dj = float(tt.j[t] - tt.j[t + 1])
                rate = math.inf if dw <= 0.0 else dj / dw
                steps.append((rate, ti, t, ("seg", h1, t)))
        else:
            tt1, tt0 = term.types[h1], term.types[h0]
            dw = float(tt0.w[t0] - tt1.w[t1])
            dj = float(tt1.j[t1] - tt0.j[t0])
            rate = math.inf if dw <= 0.0 else dj / dw
            steps.append((rate, ti, 0, ("chord", h1, t1, h0, t0)))
    steps.sort(key=lambda s: (-s[0], s[1], s[2]))

    avail = budget - spent_hi
    for rate, ti, _, action in steps:
        term = terms[ti]
        if action[0] == "seg":
            _, h, t = action
            tt = term.types[h]
            dw = float(tt.w[t + 1] - tt.w[t])
            if dw <= avail or dw <= 0.0:
                alloc[ti] = [(h, float(tt.k[t + 1]), 1.0)]
                avail -= dw
            else:
                phi = avail / dw
                z_star = float(tt.z[t] + phi * (tt.z[t + 1] - tt.z[t]))
                alloc[ti] = [(h, _segment_width(tt, t, z_star), 1.0)]
                avail = 0.0
                break
        else:
            _, h1, t1, h0, t0 = action
            tt1, tt0 = term.types[h1], term.types[h0]
            dw = float(tt0.w[t0] - tt1.w[t1])
            if dw <= avail or dw <= 0.0:
                alloc[ti] = [(h0, float(tt0.k[t0]), 1.0)]
                avail -= dw
            else:
                phi = avail / dw
                alloc[ti] = [(h1, float(tt1.k[t1]), 1.0 - phi), (h0, float(tt0.k[t0]), phi)]
                avail = 0.0
                break

    spent = 0.0
    for term, entries in zip(terms, alloc):
        for h, k, p in entries:
            tt = term.types[h]
            spent += p * term.rho * tt.cost * k / tt.hull.eval(k)
    return alloc, {"binding": True, "mu": mu_hi, "spent": float(spent)}


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def solve_boa(
    workload: WorkloadSpec, b: float, hulls: dict[tuple[str, int], ConcaveHull] | None = None
) -> WidthPlan:
    """Fractional widths minimizing mean JCT under the time-average GPU budget b.

    The realized budget is <= b (equal when the saturation plan exceeds b);
    the objective is exact for piecewise-linear hulls. Hulls default to the
    workload's own; pass `hulls` to solve against overrides (e.g. glued or
    re-profiled speedups).
    """
    loads = compute_loads(workload)
    if not loads.total < b:
        raise FeasibilityError(
            f"infeasible budget: total load {loads.total:.9g} must be < b = {b:.9g}",
            required=loads.total,
            budget=b,
        )
    terms = []
    for key in workload.class_epoch_pairs():
        hull = hulls[key] if hulls is not None else workload.hull(*key)
        terms.append(_Term(key, loads.per_epoch[key], [(1.0, hull)]))
    alloc, _ = _solve_terms(terms, b)
    widths = {}
    for term, entries in zip(terms, alloc):
        assert len(entries) == 1, "homogeneous solve cannot split a term"
        widths[term.key] = entries[0][1]
    return WidthPlan(
        widths=widths,
        plan_kind="fractional",
        run_budget=b,
        budget=b,
        glue={c.class_id: 1 for c in workload.classes},
    )


def solve_heterogeneous(workload: WorkloadSpec, types: list[GpuTypeSpec], b: float) -> HeterogeneousPlan:
    """Assignment fractions and widths across GPU types under a monetary budget.

    Minimizes sum_ijh p*rho/s_h(k_h) subject to
    sum_ijh c_h*p*rho*k_h/s_h(k_h) <= b and sum_h p = 1 per (class, epoch).
    """
    if not types:
        raise ValueError("need at least one GPU type")
    loads = compute_loads(workload)
    terms = []
    for key in workload.class_epoch_pairs():
        typed = []
        for ts in types:
            if key not in ts.hulls:
                raise ValueError(f"type {ts.type_id} missing a hull for (class, epoch) {key}")
            typed.append((ts.cost_per_hour, ts.hulls[key]))
        terms.append(_Term(key, loads.per_epoch[key], typed))
    alloc, _ = _solve_terms(terms, b)
    assignments = {}
    for term, entries in zip(terms, alloc):
        assignments[term.key] = tuple((types[h].type_id, k, p) for h, k, p in entries)
    return HeterogeneousPlan(assignments=assignments)


def evaluate_heterogeneous(
    plan: HeterogeneousPlan, workload: WorkloadSpec, types: list[GpuTypeSpec]
) -> tuple[float, float]:
    """(mean JCT, hourly cost) of a heterogeneous plan; no rescale terms."""
    by_id = {t.type_id: t for t in types}
    loads = compute_loads(workload)
    lam = workload.total_rate
    jct_sum = 0.0
    cost = 0.0
    for key, entries in plan.assignments.items():
        rho = loads.per_epoch[key]
        for tid, k, p in entries:
            ts = by_id[tid]
            s = ts.hulls[key].eval(k)
            jct_sum += p * rho / s
            cost += ts.cost_per_hour * p * rho * k / s
    return jct_sum / lam, cost


def analytic_eval(plan: WidthPlan, workload: WorkloadSpec, include_rescale: bool = True) -> PlanEvaluation:
    """Closed-form mean JCT and operating budget of a fixed-width plan.

    Without rescale terms this is the stationary fixed-width formula
    (JCT = (1/lambda) sum rho/s(k), budget = sum rho*k/s(k)). With rescale,
    each class pays its mean rescale time r_i once at initial placement
    (j = 0) and once per width change between consecutive epochs; during a
    rescale the job occupies its new width, so the budget side charges
    k_ij * r_i * lambda_i per rescale event.
    """
    missing = [key for key in workload.class_epoch_pairs() if key not in plan.widths]
    if missing:
        raise PlanCoverageError(missing)
    lam = workload.total_rate
    jct_acc = 0.0
    budget_acc = 0.0
    per_class: dict[str, float] = {}
    rescale_count: dict[str, int] = {}
    for c in workload.classes:
        jct_i = 0.0
        cost_i = 0.0
        rescales = 0
        prev_k: float | None = None
        for j, ep in enumerate(c.epochs):
            k = plan.width(c.class_id, j)
            s = ep.hull.eval(k)
            run = ep.mean_size / s
            jct_i += run
            cost_i += k * run
            if include_rescale and (j == 0 or k != prev_k):
                jct_i += c.rescale_mean
                cost_i += k * c.rescale_mean
                rescales += 1
            prev_k = k
        per_class[c.class_id] = jct_i
        rescale_count[c.class_id] = rescales
        jct_acc += c.arrival_rate * jct_i
        budget_acc += c.arrival_rate * cost_i
    return PlanEvaluation(
        mean_jct=jct_acc / lam,
        budget=budget_acc,
        per_class_jct=per_class,
        rescale_count=rescale_count,
    )


# ---------------------------------------------------------------------------
# KKT verification
# ---------------------------------------------------------------------------


@dataclass
class KktReport:
    ok: bool
    binding: bool
    multiplier: float
    slack: float
    violations: list[str]


def _segment_rates(hull: ConcaveHull) -> list[float]:
    """Marginal JCT-per-budget rate of each hull segment (= slope/intercept in k-space)."""
    rates = []
    for _, _, c, a in hull.segments():
        rates.append(math.inf if a <= 0.0 else c / a)
    return rates


def kkt_check(plan: WidthPlan, workload: WorkloadSpec, b: float, tol: float = 1e-4) -> KktReport:
    """Stationarity / complementary-slackness check of a fractional plan.

    In z-space the per-term marginal rate is constant on each hull segment,
    so every term not pinned at a domain boundary must agree on the dual
    multiplier: terms strictly inside a segment pin it exactly, terms at a
    breakpoint admit the interval between the adjacent segment rates. With a
    slack budget the multiplier must be ~0, i.e. all terms saturated.
    """
    ev = analytic_eval(plan, workload, include_rescale=False)
    slack = b - ev.budget
    violations: list[str] = []
    if slack > 1e-6 * b:
        for key in workload.class_epoch_pairs():
            hull = workload.hull(*key)
            k = plan.width(*key)
            if k < hull.saturation_width - 1e-9:
                violations.append(f"{key}: width {k} below saturation {hull.saturation_width} despite slack budget")
        return KktReport(ok=not violations, binding=False, multiplier=0.0, slack=slack, violations=violations)

    pinned: list[tuple[tuple[str, int], float]] = []
    intervals: list[tuple[tuple[str, int], float, float]] = []
    for key in workload.class_epoch_pairs():
        hull = workload.hull(*key)
        k = plan.width(*key)
        rates = _segment_rates(hull)
        if not rates:  # single-breakpoint hull: term is fixed at k=1
            continue
        ktol = 1e-9 * max(1.0, k)
        if k >= hull.saturation_width - ktol:
            intervals.append((key, 0.0, rates[-1]))
            continue
        if k <= 1.0 + ktol:
            intervals.append((key, rates[0], math.inf))
            continue
        ks = hull.ks
        at_vertex = None
        for i in range(1, len(ks) - 1):
            if abs(k - ks[i]) <= ktol:
                at_vertex = i
                break
        if at_vertex is not None:
            intervals.append((key, rates[at_vertex], rates[at_vertex - 1]))
        else:
            seg = 0
            while seg < len(ks) - 2 and k > ks[seg + 1]:
                seg += 1
            pinned.append((key, rates[seg]))

    if pinned:
        mu = sum(r for _, r in pinned) / len(pinned)
    else:
        lo = max((lo for _, lo, _ in intervals), default=0.0)
        hi = min((hi for _, _, hi in intervals), default=math.inf)
        mu = lo if math.isinf(hi) else 0.5 * (lo + hi)
    scale = max(1.0, mu)
    for key, r in pinned:
        if abs(r - mu) > tol * scale:
            violations.append(f"{key}: interior term rate {r:.6g} disagrees with multiplier {mu:.6g}")
    for key, lo, hi in intervals:
        if mu < lo - tol * scale or mu > hi + tol * scale:
            violations.append(f"{key}: multiplier {mu:.6g} outside admissible interval [{lo:.6g}, {hi:.6g}]")
    return KktReport(ok=not violations, binding=True, multiplier=mu, slack=slack, violations=violations)


# ---------------------------------------------------------------------------
# Plan files
# ---------------------------------------------------------------------------


def write_plan(plan: WidthPlan, path, evaluation: PlanEvaluation | None = None) -> None:
    by_class: dict[str, dict[int, float]] = {}
    for (cid, j), k in plan.widths.items():
        by_class.setdefault(cid, {})[j] = k
    doc = {
        "budget": plan.budget if plan.budget is not None else plan.run_budget,
        "run_budget": plan.run_budget,
        "plan_kind": plan.plan_kind,
        "glue": dict(plan.glue),
        "widths": {cid: [ws[j] for j in sorted(ws)] for cid, ws in by_class.items()},
    }
    if evaluation is not None:
        doc["rescale_aware_eval"] = {"mean_jct": evaluation.mean_jct, "budget": evaluation.budget}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_plan(path) -> WidthPlan:
    with open(path) as fh:
        doc = json.load(fh)
    widths = {}
    for cid, ws in doc["widths"].items():
        for j, k in enumerate(ws):
            widths[(cid, j)] = float(k)
    return WidthPlan(
        widths=widths,
        plan_kind=doc.get("plan_kind", "fractional"),
        run_budget=float(doc["run_budget"]),
        budget=float(doc["budget"]) if "budget" in doc else None,
        glue={str(c): int(g) for c, g in doc.get("glue", {}).items()},
    )
