"""Command-line surface: trace generation, plan solving, simulation, frontiers.

Exit codes: 0 success, 2 usage or input parse error, 3 infeasible budget.
CSV column layouts are fixed and documented in FORMATS.md.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FeasibilityError, PlanCoverageError, TraceParseError
from .optimizer import read_plan, write_plan
from .reporting import (
    FrontierRow,
    render_compare_figure,
    render_frontier_figure,
    write_compare_csv,
    write_frontier_csv,
)
from .simulator import (
    CompareRow,
    EfficiencyTargetPolicy,
    FixedWidthPolicy,
    SimConfig,
    simulate,
)
from .width_calculator import boa_width_calculator, recompute_schedule
from .workload import (
    ArrivalModel,
    gen_trace,
    read_trace,
    read_workload,
    write_trace,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


def _add_sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--gpus-per-node", type=int, default=1, help="node granularity (default 1)")
    p.add_argument("--provisioning-delay", type=float, default=0.0, help="seconds a new job waits before placement")
    p.add_argument("--quantum", type=float, default=60.0, help="baseline scheduling quantum, seconds")
    p.add_argument("--recompute-interval", type=float, default=None, help="fixed-width plan refresh period, seconds")
    p.add_argument("--horizon", type=float, default=None, help="truncate the simulation at this time")


def _sim_config(args, seed: int) -> SimConfig:
    return SimConfig(
        gpus_per_node=args.gpus_per_node,
        provisioning_delay=args.provisioning_delay,
        horizon=args.horizon,
        recompute_interval=getattr(args, "recompute_interval", None),
        quantum=args.quantum,
        seed=seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpurent",
        description=__doc__,
        epilog=(
            "CSV column layouts: frontier -> budget,status,analytic_mean_jct,sim_mean_jct,"
            "sim_p95_jct,time_avg_usage; compare -> policy,param,mean_jct,p95_jct,time_avg_usage; "
            "jobs -> job_id,class,arrival,jct,gpu_hours. Full file formats: FORMATS.md."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="generate an arrival trace from a workload spec")
    p.add_argument("spec", help="workload spec JSON")
    p.add_argument("--model", choices=["poisson", "bursty"], default="poisson")
    p.add_argument("--c2", type=float, default=2.65, help="target interarrival C^2 (bursty model)")
    p.add_argument("--rate-ratio", type=float, default=None, help="bursty high:low rate ratio (default: auto)")
    p.add_argument("--high-fraction", type=float, default=0.05, help="bursty fraction of time at the high rate")
    p.add_argument("--n", type=int, required=True, help="number of arrivals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output trace file (JSON lines)")
    p.set_defaults(func=cmd_gen_trace)

    for name in ("widths", "solve"):
        p = sub.add_parser(name, help="compute the integer width plan for a budget")
        p.add_argument("spec")
        p.add_argument("--budget", type=float, required=True, help="time-average GPU budget b")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output plan file (JSON)")
        p.set_defaults(func=cmd_widths)

    p = sub.add_parser("simulate", help="run one policy against a trace")
    p.add_argument("spec")
    p.add_argument("trace")
    p.add_argument("--policy", choices=["boa", "efficiency"], required=True)
    p.add_argument("--budget", type=float, default=None, help="budget for the boa policy")
    p.add_argument("--plan", default=None, help="pre-computed plan file for the boa policy")
    p.add_argument("--target-c", type=float, default=None, help="efficiency target for the baseline")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="metrics summary JSON")
    p.add_argument("--events-out", default=None, help="event log (JSON lines)")
    p.add_argument("--jobs-csv", default=None, help="per-job CSV (job_id,class,arrival,jct,gpu_hours)")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("frontier", help="Pareto frontier: one plan + simulation per budget")
    p.add_argument("spec")
    p.add_argument("trace")
    p.add_argument("--budgets", type=float, nargs="+", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--plot", default=None, help="also render a PNG figure here")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("compare", help="fixed-width vs efficiency-target on the identical trace")
    p.add_argument("spec")
    p.add_argument("trace")
    p.add_argument("--boa-budgets", type=float, nargs="*", default=[])
    p.add_argument("--efficiency-targets", type=float, nargs="*", default=[])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--plot", default=None, help="also render a PNG figure here")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_compare)

    return parser


def cmd_gen_trace(args) -> int:
    spec = read_workload(args.spec)
    if args.model == "poisson":
        model = ArrivalModel.poisson(spec.total_rate)
    else:
        model = ArrivalModel.bursty_with_c2(
            spec.total_rate, args.c2, rate_ratio=args.rate_ratio, high_fraction=args.high_fraction
        )
    trace = gen_trace(spec, model, args.n, args.seed)
    write_trace(trace, args.out)
    print(f"wrote {len(trace)} arrivals to {args.out} (model={args.model}, analytic C^2={model.interarrival_c2():.4g})")
    return EXIT_OK


def cmd_widths(args) -> int:
    spec = read_workload(args.spec)
    plan, ev = boa_width_calculator(spec, args.budget, args.seed)
    write_plan(plan, args.out, evaluation=ev)
    print(f"plan written to {args.out}")
    print(f"analytic mean_jct={ev.mean_jct:.6f} s  budget={ev.budget:.6f} GPUs (cap {args.budget:g})")
    return EXIT_OK


def _boa_policy(spec, budget, plan_file, seed, recompute_interval):
    if plan_file is not None:
        plan = read_plan(plan_file)
    else:
        if budget is None:
            raise SystemExit2("boa policy needs --budget or --plan")
        plan, _ = boa_width_calculator(spec, budget, seed)
    hook = None
    if recompute_interval is not None:
        hook = recompute_schedule(recompute_interval, plan.budget or plan.run_budget, seed)
    return FixedWidthPolicy(plan, recompute=hook)


class SystemExit2(Exception):
    """Usage error surfaced with exit code 2."""


def cmd_simulate(args) -> int:
    spec = read_workload(args.spec)
    trace = read_trace(args.trace)
    if args.policy == "boa":
        policy = _boa_policy(spec, args.budget, args.plan, args.seed, args.recompute_interval)
    else:
        if args.target_c is None:
            raise SystemExit2("efficiency policy needs --target-c")
        policy = EfficiencyTargetPolicy(args.target_c)
        print(f"efficiency target c={policy.c:g}, band delta={policy.delta:g}")
    metrics, events = simulate(trace, policy, spec, _sim_config(args, args.seed))
    print(
        f"completed {metrics.n_completed}/{len(trace)} jobs: mean_jct={metrics.mean_jct:.4f} s  "
        f"p95_jct={metrics.p95_jct:.4f} s  time_avg_usage={metrics.time_avg_usage:.4f} GPUs"
    )
    if args.out:
        summary = {
            "policy": policy.kind,
            "param": policy.param,
            "mean_jct": metrics.mean_jct,
            "p95_jct": metrics.p95_jct,
            "time_avg_usage": metrics.time_avg_usage,
            "interarrival_c2": metrics.interarrival_c2,
            "n_completed": metrics.n_completed,
            "horizon": metrics.horizon,
            "truncated": metrics.truncated,
        }
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    if args.events_out:
        with open(args.events_out, "w") as fh:
            for rec in events:
                fh.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")
    if args.jobs_csv:
        import csv as _csv

        arrivals = {}
        completions = {}
        for rec in events:
            if rec.event == "arrive":
                arrivals[rec.job] = rec.t
            elif rec.event == "complete":
                completions[rec.job] = rec.t
        with open(args.jobs_csv, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["job_id", "class", "arrival", "jct", "gpu_hours"])
            hours = dict(zip(sorted(completions), metrics.per_job_gpu_hours))
            for jid in sorted(completions):
                w.writerow(
                    [
                        jid,
                        trace.events[jid].class_id,
                        f"{arrivals[jid]:.6f}",
                        f"{completions[jid] - arrivals[jid]:.6f}",
                        f"{hours[jid] / 3600.0:.6f}",
                    ]
                )
    return EXIT_OK


def cmd_frontier(args) -> int:
    spec = read_workload(args.spec)
    trace = read_trace(args.trace)
    config = _sim_config(args, args.seed)
    rows: list[FrontierRow] = []
    best = None  # (analytic mean_jct, plan) dominance carry-forward
    for b in sorted(args.budgets):
        try:
            plan, ev = boa_width_calculator(spec, b, args.seed)
        except FeasibilityError:
            rows.append(FrontierRow(budget=b, status="infeasible"))
            continue
        if best is not None and best[0] <= ev.mean_jct:
            plan, ev = best[1], best[2]  # lower-budget plan still feasible and better
        best = (ev.mean_jct, plan, ev)
        metrics, _ = simulate(trace, FixedWidthPolicy(plan), spec, config)
        rows.append(
            FrontierRow(
                budget=b,
                status="ok",
                analytic_mean_jct=ev.mean_jct,
                sim_mean_jct=metrics.mean_jct,
                sim_p95_jct=metrics.p95_jct,
                time_avg_usage=metrics.time_avg_usage,
            )
        )
    write_frontier_csv(rows, args.out)
    print(f"wrote {len(rows)} frontier rows to {args.out}")
    if args.plot:
        render_frontier_figure(rows, args.plot)
        print(f"figure rendered to {args.plot}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.boa_budgets and not args.efficiency_targets:
        raise SystemExit2("compare needs at least one --boa-budgets or --efficiency-targets value")
    spec = read_workload(args.spec)
    trace = read_trace(args.trace)
    config = _sim_config(args, args.seed)
    rows: list[CompareRow] = []
    for b in args.boa_budgets:
        plan, _ = boa_width_calculator(spec, b, args.seed)
        metrics, _ = simulate(trace, FixedWidthPolicy(plan), spec, config)
        rows.append(CompareRow("fixed_width", b, metrics.mean_jct, metrics.p95_jct, metrics.time_avg_usage))
    for c in args.efficiency_targets:
        metrics, _ = simulate(trace, EfficiencyTargetPolicy(c), spec, config)
        rows.append(CompareRow("efficiency_target", c, metrics.mean_jct, metrics.p95_jct, metrics.time_avg_usage))
    write_compare_csv(rows, args.out)
    print(f"wrote {len(rows)} comparison rows to {args.out}")
    if args.plot:
        render_compare_figure(rows, args.plot)
        print(f"figure rendered to {args.plot}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceParseError, PlanCoverageError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
