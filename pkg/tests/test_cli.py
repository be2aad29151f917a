import csv
import json

import pytest

from gpurent.cli import main
from gpurent.workload import WorkloadSpec, write_workload

from conftest import PROFILE_A, PROFILE_B, epoch, job_class


@pytest.fixture
def spec_file(tmp_path):
    wl = WorkloadSpec(
        classes=(
            job_class("small", 0.02, [epoch(60.0, PROFILE_A)], rescale_mean=20.0),
            job_class("big", 0.01, [epoch(120.0, PROFILE_B), epoch(150.0, PROFILE_A)], rescale_mean=20.0),
        )
    )
    path = tmp_path / "workload.json"
    write_workload(wl, path)
    return path


@pytest.fixture
def trace_file(spec_file, tmp_path):
    out = tmp_path / "trace.jsonl"
    assert main(["gen-trace", str(spec_file), "--model", "poisson", "--n", "400", "--seed", "7", "--out", str(out)]) == 0
    return out


class TestGenTrace:
    def test_deterministic_output(self, spec_file, tmp_path):
        o1, o2 = tmp_path / "t1.jsonl", tmp_path / "t2.jsonl"
        assert main(["gen-trace", str(spec_file), "--model", "poisson", "--n", "100", "--seed", "7", "--out", str(o1)]) == 0
        assert main(["gen-trace", str(spec_file), "--model", "poisson", "--n", "100", "--seed", "7", "--out", str(o2)]) == 0
        assert o1.read_bytes() == o2.read_bytes()

    def test_bursty_c2_smoke(self, spec_file, tmp_path):
        # full 1e6-sample calibration is covered by the acceptance suite
        from gpurent.workload import read_trace

        out = tmp_path / "bursty.jsonl"
        assert main(["gen-trace", str(spec_file), "--model", "bursty", "--c2", "2.65", "--n", "50000", "--seed", "3", "--out", str(out)]) == 0
        c2 = read_trace(out).interarrival_c2()
        assert c2 == pytest.approx(2.65, abs=0.5)

    def test_missing_spec_exits_2(self, tmp_path, capsys):
        rc = main(["gen-trace", str(tmp_path / "nope.json"), "--n", "10", "--out", str(tmp_path / "t.jsonl")])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestWidths:
    def test_saturation_budget(self, spec_file, tmp_path, capsys):
        out = tmp_path / "plan.json"
        assert main(["widths", str(spec_file), "--budget", "40", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["widths"]["small"] == [4.0]
        assert doc["widths"]["big"] == [4.0, 4.0]
        assert "mean_jct" in capsys.readouterr().out

    def test_solve_alias(self, spec_file, tmp_path):
        out = tmp_path / "plan.json"
        assert main(["solve", str(spec_file), "--budget", "40", "--out", str(out)]) == 0

    def test_tight_budget_near_unit_widths(self, tmp_path):
        wl = WorkloadSpec(classes=(job_class("A", 0.01, [epoch(100.0, ((1, 1.0), (2, 1.8)))]),))
        spec = tmp_path / "wl.json"
        write_workload(wl, spec)
        out = tmp_path / "plan.json"
        assert main(["widths", str(spec), "--budget", "1.05", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["widths"]["A"] == [1.0]

    def test_infeasible_budget_exits_3(self, spec_file, tmp_path, capsys):
        rc = main(["widths", str(spec_file), "--budget", "1.0", "--out", str(tmp_path / "p.json")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "budget" in err

    def test_plan_file_rescale_eval_block(self, spec_file, tmp_path):
        out = tmp_path / "plan.json"
        main(["widths", str(spec_file), "--budget", "8", "--out", str(out)])
        doc = json.loads(out.read_text())
        assert set(doc["rescale_aware_eval"]) == {"mean_jct", "budget"}
        assert doc["rescale_aware_eval"]["budget"] <= 8.0


class TestSimulate:
    def test_boa_consistency(self, spec_file, trace_file, tmp_path, capsys):
        out = tmp_path / "metrics.json"
        rc = main(
            [
                "simulate", str(spec_file), str(trace_file),
                "--policy", "boa", "--budget", "8", "--out", str(out),
                "--jobs-csv", str(tmp_path / "jobs.csv"),
                "--events-out", str(tmp_path / "events.jsonl"),
            ]
        )
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["n_completed"] == 400
        rows = list(csv.DictReader(open(tmp_path / "jobs.csv")))
        assert len(rows) == 400
        assert set(rows[0]) == {"job_id", "class", "arrival", "jct", "gpu_hours"}
        first_event = json.loads((tmp_path / "events.jsonl").read_text().splitlines()[0])
        assert set(first_event) == {"t", "event", "job", "k", "cluster_gpus"}

    def test_efficiency_reports_delta(self, spec_file, trace_file, capsys):
        rc = main(["simulate", str(spec_file), str(trace_file), "--policy", "efficiency", "--target-c", "0.5"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "delta=0.15" in out

    def test_unknown_policy_usage_error(self, spec_file, trace_file):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", str(spec_file), str(trace_file), "--policy", "bogus"])
        assert exc.value.code == 2

    def test_missing_policy_param(self, spec_file, trace_file, capsys):
        assert main(["simulate", str(spec_file), str(trace_file), "--policy", "efficiency"]) == 2
        assert main(["simulate", str(spec_file), str(trace_file), "--policy", "boa"]) == 2


class TestFrontier:
    def test_rows_and_monotonicity(self, spec_file, trace_file, tmp_path):
        out = tmp_path / "frontier.csv"
        rc = main(
            ["frontier", str(spec_file), str(trace_file), "--budgets", "6", "8", "12", "16", "--out", str(out)]
        )
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert [float(r["budget"]) for r in rows] == [6.0, 8.0, 12.0, 16.0]
        jcts = [float(r["analytic_mean_jct"]) for r in rows]
        assert all(b <= a for a, b in zip(jcts, jcts[1:]))

    def test_infeasible_budget_flagged_others_computed(self, spec_file, trace_file, tmp_path):
        out = tmp_path / "frontier.csv"
        rc = main(["frontier", str(spec_file), str(trace_file), "--budgets", "1", "8", "--out", str(out)])
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert rows[0]["status"] == "infeasible" and rows[0]["analytic_mean_jct"] == ""
        assert rows[1]["status"] == "ok"

    def test_plot_rendered(self, spec_file, trace_file, tmp_path):
        out, png = tmp_path / "f.csv", tmp_path / "f.png"
        rc = main(
            ["frontier", str(spec_file), str(trace_file), "--budgets", "8", "12", "--out", str(out), "--plot", str(png)]
        )
        assert rc == 0
        assert png.stat().st_size > 0


class TestCompare:
    def test_two_rows_identical_trace(self, spec_file, trace_file, tmp_path):
        out = tmp_path / "cmp.csv"
        rc = main(
            [
                "compare", str(spec_file), str(trace_file),
                "--boa-budgets", "8", "--efficiency-targets", "0.5", "--out", str(out),
            ]
        )
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert [r["policy"] for r in rows] == ["fixed_width", "efficiency_target"]

    def test_empty_policies_usage_error(self, spec_file, trace_file, tmp_path, capsys):
        rc = main(["compare", str(spec_file), str(trace_file), "--out", str(tmp_path / "c.csv")])
        assert rc == 2

    def test_plot_rendered(self, spec_file, trace_file, tmp_path):
        out, png = tmp_path / "c.csv", tmp_path / "c.png"
        rc = main(
            [
                "compare", str(spec_file), str(trace_file),
                "--boa-budgets", "8", "10", "--efficiency-targets", "0.5", "--out", str(out), "--plot", str(png),
            ]
        )
        assert rc == 0
        assert png.stat().st_size > 0
