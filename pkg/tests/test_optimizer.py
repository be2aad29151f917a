import numpy as np
import pytest

from gpurent.errors import FeasibilityError, PlanCoverageError
from gpurent.optimizer import (
    GpuTypeSpec,
    analytic_eval,
    evaluate_heterogeneous,
    kkt_check,
    read_plan,
    solve_boa,
    solve_heterogeneous,
    write_plan,
)
from gpurent.workload import WorkloadSpec, compute_loads

from conftest import PROFILE_A, PROFILE_B, epoch, hull, job_class, random_instance
from oracles import grid_solve, heterogeneous_brute_force, make_plan


def objective(plan, workload):
    """sum_ij rho_ij / s_ij(k_ij), i.e. mean JCT times lambda."""
    ev = analytic_eval(plan, workload, include_rescale=False)
    return ev.mean_jct * workload.total_rate


class TestAnalyticEval:
    def test_single_epoch_no_rescale(self):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(100.0, ((1, 1.0), (2, 1.8)))]),))
        ev = analytic_eval(make_plan({("A", 0): 2.0}), wl, include_rescale=False)
        assert ev.mean_jct == pytest.approx(100.0 / 1.8)
        assert ev.budget == pytest.approx(0.01 * 100.0 * 2.0 / 1.8)

    def test_initial_placement_charged(self):
        wl = WorkloadSpec(
            classes=(job_class("A", 0.01, [epoch(100.0, ((1, 1.0), (2, 1.8)))], rescale_mean=20.0),)
        )
        ev = analytic_eval(make_plan({("A", 0): 2.0}), wl, include_rescale=True)
        assert ev.mean_jct == pytest.approx(100.0 / 1.8 + 20.0)
        assert ev.budget == pytest.approx(0.01 * 2.0 * (100.0 / 1.8 + 20.0))
        assert ev.rescale_count["A"] == 1

    def test_equal_widths_charge_once_unequal_twice(self):
        wl = WorkloadSpec(
            classes=(job_class("A", 0.01, [epoch(50.0), epoch(70.0)], rescale_mean=20.0),)
        )
        ev_eq = analytic_eval(make_plan({("A", 0): 2.0, ("A", 1): 2.0}), wl)
        ev_ne = analytic_eval(make_plan({("A", 0): 2.0, ("A", 1): 3.0}), wl)
        assert ev_eq.rescale_count["A"] == 1
        assert ev_ne.rescale_count["A"] == 2
        base = 50.0 / 1.8 + 70.0 / 1.8
        assert ev_eq.mean_jct == pytest.approx(base + 20.0)
        assert ev_ne.mean_jct == pytest.approx(50.0 / 1.8 + 70.0 / 2.4 + 40.0)

    def test_reduces_to_no_rescale_at_r_zero(self):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(50.0), epoch(70.0)]),))
        plan = make_plan({("A", 0): 2.0, ("A", 1): 3.0})
        with_r = analytic_eval(plan, wl, include_rescale=True)
        without = analytic_eval(plan, wl, include_rescale=False)
        assert with_r.mean_jct == without.mean_jct
        assert with_r.budget == without.budget

    def test_missing_widths_listed(self):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(50.0), epoch(70.0)]),))
        with pytest.raises(PlanCoverageError) as exc:
            analytic_eval(make_plan({("A", 0): 2.0}), wl)
        assert ("A", 1) in exc.value.missing


class TestSolveBoa:
    def test_saturation_at_large_budget(self, two_class_workload):
        loads = compute_loads(two_class_workload)
        b = sum(
            loads.per_epoch[key] * two_class_workload.hull(*key).saturation_width / two_class_workload.hull(*key).max_speedup
            for key in two_class_workload.class_epoch_pairs()
        )
        plan = solve_boa(two_class_workload, b * 1.0001)
        for key in two_class_workload.class_epoch_pairs():
            assert plan.width(*key) == two_class_workload.hull(*key).saturation_width

    def test_boundary_budget_gives_unit_widths(self):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(100.0, ((1, 1.0), (2, 1.8)))]),))
        plan = solve_boa(wl, 1.0 * (1 + 1e-9))
        assert plan.width("A", 0) == pytest.approx(1.0, abs=1e-6)

    def test_two_class_instance_matches_grid_oracle(self, two_class_workload):
        plan = solve_boa(two_class_workload, 3.0)
        ev = analytic_eval(plan, two_class_workload, include_rescale=False)
        assert ev.budget <= 3.0 * (1 + 1e-6)
        oracle_obj, oracle_ks = grid_solve(
            [(1.0, hull(PROFILE_A)), (1.0, hull(PROFILE_B))], 3.0, step=0.01
        )
        assert objective(plan, two_class_workload) == pytest.approx(oracle_obj, rel=1e-3)
        # frozen expected values from the grid oracle run (step 0.01):
        # objective 0.944444..., optimum ties along rate-1/3 segments
        assert oracle_obj == pytest.approx(0.9444444444444444, rel=1e-3)

    def test_budget_tight_when_constrained(self, two_class_workload):
        plan = solve_boa(two_class_workload, 3.0)
        ev = analytic_eval(plan, two_class_workload, include_rescale=False)
        assert ev.budget == pytest.approx(3.0, rel=1e-6)

    def test_infeasible_reports_load_and_budget(self, two_class_workload):
        with pytest.raises(FeasibilityError) as exc:
            solve_boa(two_class_workload, 1.5)
        assert exc.value.required == pytest.approx(2.0)
        assert exc.value.budget == 1.5
        assert "2" in str(exc.value) and "1.5" in str(exc.value)

    def test_pareto_monotone(self, two_class_workload):
        objs = [objective(solve_boa(two_class_workload, b), two_class_workload) for b in (2.2, 2.5, 3.0, 4.0, 6.0)]
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))

    def test_scale_invariance(self, two_class_workload):
        plan1 = solve_boa(two_class_workload, 3.0)
        scaled = WorkloadSpec(
            classes=tuple(
                job_class(c.class_id, c.arrival_rate * 7.5, list(c.epochs)) for c in two_class_workload.classes
            )
        )
        plan2 = solve_boa(scaled, 3.0 * 7.5)
        for key in two_class_workload.class_epoch_pairs():
            assert plan2.width(*key) == pytest.approx(plan1.width(*key), rel=1e-9)

    def test_oracle_equivalence_random_instances(self):
        rng = np.random.default_rng(2024)
        for trial in range(8):
            wl = random_instance(rng)
            loads = compute_loads(wl)
            b = loads.total * float(rng.uniform(1.05, 2.5))
            plan = solve_boa(wl, b)
            ev = analytic_eval(plan, wl, include_rescale=False)
            assert ev.budget <= b * (1 + 1e-6)
            terms = [(loads.per_epoch[key], wl.hull(*key)) for key in wl.class_epoch_pairs()]
            oracle_obj, _ = grid_solve(terms, b)
            assert objective(plan, wl) <= oracle_obj * (1 + 1e-3)

    def test_exactly_linear_segment_is_free_upgrade(self):
        # s(k) = k up to 2: doubling width costs nothing per unit work
        wl = WorkloadSpec(classes=(job_class("A", 0.5, [epoch(2.0, ((1, 1.0), (2, 2.0), (3, 2.5)))]),))
        plan = solve_boa(wl, 1.0 + 1e-9)
        assert plan.width("A", 0) >= 2.0


class TestKktCheck:
    def test_slack_budget_zero_multiplier(self, two_class_workload):
        plan = solve_boa(two_class_workload, 50.0)
        rep = kkt_check(plan, two_class_workload, 50.0)
        assert rep.ok and not rep.binding and rep.multiplier == 0.0

    def test_boundary_plan_vacuous(self):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(100.0, ((1, 1.0), (2, 1.8)))]),))
        b = 1.0 * (1 + 1e-9)
        rep = kkt_check(solve_boa(wl, b), wl, b)
        assert rep.ok

    def test_interior_plan_shares_multiplier(self, two_class_workload):
        plan = solve_boa(two_class_workload, 3.0)
        rep = kkt_check(plan, two_class_workload, 3.0)
        assert rep.ok and rep.binding
        assert rep.multiplier == pytest.approx(1.0 / 3.0, abs=1e-4)

    def test_detects_tampered_plan(self, two_class_workload):
        plan = solve_boa(two_class_workload, 3.0)
        plan.widths[("B", 0)] = 1.4  # interior but off the optimal rate
        rep = kkt_check(plan, two_class_workload, 3.0)
        assert not rep.ok and rep.violations


def _mono_types(workload, costs, degrade=None):
    """Build GpuTypeSpec list sharing the workload's hulls (optionally degraded)."""
    types = []
    for tid, cost in costs:
        hulls = {}
        for key in workload.class_epoch_pairs():
            h = workload.hull(*key)
            if degrade and tid in degrade:
                factor = degrade[tid]
                from gpurent.speedup import ConcaveHull

                h = ConcaveHull(ks=h.ks, ss=tuple(s * factor for s in h.ss))
            hulls[key] = h
        types.append(GpuTypeSpec(type_id=tid, cost_per_hour=cost, hulls=hulls))
    return types


class TestHeterogeneous:
    def test_single_type_reduces_to_homogeneous(self, two_class_workload):
        types = _mono_types(two_class_workload, [("t4", 1.0)])
        het = solve_heterogeneous(two_class_workload, types, 3.0)
        homog = solve_boa(two_class_workload, 3.0)
        jct_het, cost_het = evaluate_heterogeneous(het, two_class_workload, types)
        ev = analytic_eval(homog, two_class_workload, include_rescale=False)
        assert jct_het == pytest.approx(ev.mean_jct, rel=1e-6)
        assert cost_het == pytest.approx(ev.budget, rel=1e-6)
        for key, entries in het.assignments.items():
            total_p = sum(p for _, _, p in entries)
            assert total_p == pytest.approx(1.0)

    def test_identical_types_match_homogeneous_objective(self, two_class_workload):
        types = _mono_types(two_class_workload, [("t1", 1.0), ("t2", 1.0)])
        het = solve_heterogeneous(two_class_workload, types, 3.0)
        jct_het, cost_het = evaluate_heterogeneous(het, two_class_workload, types)
        ev = analytic_eval(solve_boa(two_class_workload, 3.0), two_class_workload, include_rescale=False)
        assert jct_het == pytest.approx(ev.mean_jct, rel=1e-6)
        assert cost_het <= 3.0 * (1 + 1e-6)

    def test_dominated_type_unused(self, two_class_workload):
        # type B: strictly slower everywhere and more expensive
        types = _mono_types(two_class_workload, [("fast", 1.0), ("slow", 1.2)], degrade={"slow": 0.8})
        het = solve_heterogeneous(two_class_workload, types, 3.0)
        for key in two_class_workload.class_epoch_pairs():
            assert het.fraction(*key, "slow") == 0.0
        # oracle: brute force confirms the chosen objective
        jct_het, cost_het = evaluate_heterogeneous(het, two_class_workload, types)
        oracle_obj, _ = heterogeneous_brute_force(two_class_workload, types, 3.0)
        assert jct_het * two_class_workload.total_rate <= oracle_obj * (1 + 1e-9)
        assert cost_het <= 3.0 * (1 + 1e-6)

    def test_brute_force_equivalence_on_binding_instance(self, two_class_workload):
        types = _mono_types(two_class_workload, [("fast", 1.0), ("cheap", 0.6)], degrade={"cheap": 0.7})
        b = 2.2
        het = solve_heterogeneous(two_class_workload, types, b)
        jct_het, cost_het = evaluate_heterogeneous(het, two_class_workload, types)
        assert cost_het <= b * (1 + 1e-6)
        oracle_obj, oracle_arg = heterogeneous_brute_force(two_class_workload, types, b)
        assert jct_het * two_class_workload.total_rate <= oracle_obj * (1 + 1e-3)

    def test_infeasible(self, two_class_workload):
        types = _mono_types(two_class_workload, [("t", 2.0)])
        with pytest.raises(FeasibilityError):
            solve_heterogeneous(two_class_workload, types, 2.0)  # min cost = 2*rho = 4


class TestPlanIO:
    def test_roundtrip(self, two_class_workload, tmp_path):
        plan = solve_boa(two_class_workload, 3.0)
        path = tmp_path / "plan.json"
        write_plan(plan, path, evaluation=analytic_eval(plan, two_class_workload))
        back = read_plan(path)
        assert back.widths == plan.widths
        assert back.run_budget == plan.run_budget
        assert back.budget == plan.budget
        assert back.glue == plan.glue
