"""Unit tests for run metrics, solution documents, manifests and the run history"""

import json
import math

import pytest

from src.analytics.metrics import RunMetrics
from src.analytics.reporter import (
    Reporter,
    RunManifest,
    format_census,
    format_table,
    manifest_path,
    solution_document,
    write_csv,
    write_json,
    write_manifest,
)
from src.bounds.interval import interval_bounds
from src.bounds.table import Provenance
from src.encoding.encoder import encode_problem, encode_robustness
from src.encoding.problem import InverseProblem
from src.memory.models import RunRecord
from src.memory.store import RunStore
from src.milp.branch_and_bound import SolveReport, SolveStatus, solve_milp


def solved(net, problem):
    encoded = encode_problem(net, interval_bounds(net, problem.lower, problem.upper), problem)
    return encoded, solve_milp(encoded.model)


class TestRunMetrics:
    """Counters for one run"""

    def test_solve_and_failure_counts(self, toy_net):
        metrics = RunMetrics()
        _, report = solved(toy_net, InverseProblem(targets=[[0.3]], lower=[-1.0, -1.0], upper=[1.0, 1.0]))
        metrics.record_solve(report)
        metrics.record_failure("ProblemError", "cmd_invert", "bad box", {"exit_code": 4})
        summary = metrics.get_summary()
        assert summary["solves"] == 1
        assert summary["by_status"] == {"optimal": 1}
        assert summary["nodes_explored"] == report.nodes_explored
        assert summary["total_errors"] == 1
        assert summary["failures"][0]["type"] == "ProblemError"
        assert summary["failures"][0]["context"]["exit_code"] == 4

    def test_bounds_and_injections(self, toy_net):
        metrics = RunMetrics()
        table = interval_bounds(toy_net, [-1.0, -1.0], [1.0, 1.0])
        table.provenance[0][0] = Provenance.MILP_EXACT
        table.provenance[0][1] = Provenance.MILP_RELAXED
        metrics.record_bounds(table)
        metrics.record_injections([{"accepted": True}, {"accepted": False}, {"accepted": True}])
        metrics.record_phase("bounds", 1.5)
        metrics.record_phase("bounds", 0.5)
        summary = metrics.get_summary()
        assert summary["nodes_tightened"] == 2
        assert summary["nodes_exact"] == 1
        assert summary["injection_acceptance_rate"] == pytest.approx(2 / 3)
        assert summary["phases"] == {"bounds": 2.0}

    def test_reset(self):
        metrics = RunMetrics()
        metrics.record_phase("solve", 1.0)
        metrics.reset()
        assert metrics.get_summary()["phases"] == {}


class TestSolutionDocument:
    """Solver outcome with re-simulation"""

    def test_inverse_document(self, toy_net):
        problem = InverseProblem(targets=[[0.3], [-0.5]], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        encoded, report = solved(toy_net, problem)
        document = solution_document(encoded, report)
        assert document["mode"] == "inverse"
        assert document["status"] == "optimal"
        assert len(document["copies"]) == 2
        assert document["resimulated_objective"] == pytest.approx(report.incumbent_obj, abs=1e-6)
        assert document["objective_agreement"] <= 1e-6
        assert document["resimulation_error"] <= 1e-6
        assert document["selected"] is None
        assert "wall_time" not in document

    def test_selection_lists_selected_inputs(self, toy_net):
        problem = InverseProblem(targets=[[0.3]], lower=[0.0, 0.0], upper=[1.0, 1.0], selection_budget=1)
        encoded, report = solved(toy_net, problem)
        assert len(solution_document(encoded, report)["selected"]) <= 1

    def test_display_scale(self, toy_net):
        problem = InverseProblem(targets=[[0.3]], lower=[0.0, 0.0], upper=[7.0, 7.0], integer=[True, True], scale=[10.0, 1.0])
        document = solution_document(*solved(toy_net, problem))
        (copy,) = document["copies"]
        assert copy["display_design"] == pytest.approx([10.0 * copy["design"][0], copy["design"][1]])

    def test_no_display_design_without_scale(self, toy_net):
        problem = InverseProblem(targets=[[0.3]], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        (copy,) = solution_document(*solved(toy_net, problem))["copies"]
        assert "display_design" not in copy

    def test_robustness_block(self, toy_net):
        candidate, epsilon = [0.2, 0.1], 0.05
        bounds = interval_bounds(toy_net, [0.15, 0.05], [0.25, 0.15])
        encoded = encode_robustness(toy_net, bounds, candidate, epsilon, [0.5])
        document = solution_document(encoded, solve_milp(encoded.model))
        block = document["robustness"]
        assert block["epsilon"] == epsilon
        assert document["objective"] >= block["nominal_deviation"] - 1e-9
        assert block["witness"] == document["copies"][0]["design"]

    def test_without_incumbent(self, toy_net):
        problem = InverseProblem(targets=[[0.3]], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        encoded, _ = solved(toy_net, problem)
        empty = SolveReport(status=SolveStatus.TIME_LIMIT, relaxed_bound=-math.inf, gap=math.inf)
        document = solution_document(encoded, empty, extra={"note": "x"})
        assert document["copies"] == []
        assert document["gap"] is None and document["relaxed_bound"] is None
        assert document["note"] == "x"

    def test_written_documents_are_deterministic(self, tmp_path, toy_net):
        problem = InverseProblem(targets=[[0.3]], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        first = write_json(solution_document(*solved(toy_net, problem)), tmp_path / "a.json")
        second = write_json(solution_document(*solved(toy_net, problem)), tmp_path / "b.json")
        assert first.read_bytes() == second.read_bytes()


class TestManifest:
    """Run manifests"""

    def test_path_beside_output(self, tmp_path):
        assert manifest_path(tmp_path / "sol.json", "logs/manifests", "invert", "abc") == tmp_path / "sol.manifest.json"

    def test_path_in_manifest_dir(self, tmp_path):
        assert manifest_path(None, tmp_path, "bounds", "abc") == tmp_path / "bounds_abc.manifest.json"

    def test_written_manifest(self, tmp_path):
        path = write_manifest(RunManifest(run_id="abc", command="forward", exit_code=0), tmp_path / "m.manifest.json")
        document = json.loads(path.read_text(encoding="utf-8"))
        assert document["run_id"] == "abc"
        assert document["format_version"] == 1
        assert document["tool_version"]


class TestTables:
    """Console and CSV output"""

    def test_format_table(self):
        text = format_table(["a", "bb"], [[1, "x" * 50]], max_width=10)
        header, rule, row = text.split("\n")
        assert header.startswith("a | bb")
        assert set(rule) == {"-"}
        assert row.endswith("xxxxxxx...")

    def test_format_census(self, toy_net):
        text = format_census(interval_bounds(toy_net, [-1.0, -1.0], [1.0, 1.0]))
        assert "Unstable" in text
        assert text.splitlines()[-1].startswith("total")

    def test_write_csv(self, tmp_path):
        path = write_csv([{"a": 1, "b": 2}], ["a", "b"], tmp_path / "out.csv")
        assert path.read_text(encoding="utf-8").splitlines() == ["a,b", "1,2"]


class TestRunStore:
    """Run history"""

    def test_record_and_recent(self, tmp_path):
        store = RunStore(tmp_path / "history.json")
        for i, command in enumerate(["invert", "bounds", "invert"]):
            store.record_run(RunRecord(run_id=str(i), command=command, exit_code=0))
        reloaded = RunStore(tmp_path / "history.json")
        assert len(reloaded) == 3
        assert [r.run_id for r in reloaded.recent_runs(limit=2)] == ["2", "1"]
        assert [r.run_id for r in reloaded.recent_runs(command="invert")] == ["2", "0"]

    def test_oldest_runs_dropped_beyond_limit(self, tmp_path):
        store = RunStore(tmp_path / "history.json", max_runs=3)
        for i in range(5):
            store.record_run(RunRecord(run_id=str(i), command="invert", exit_code=0))
        reloaded = RunStore(tmp_path / "history.json")
        assert len(reloaded) == 3
        assert [r.run_id for r in reloaded.recent_runs()] == ["4", "3", "2"]

    def test_corrupt_file_starts_fresh(self, tmp_path):
        path = tmp_path / "history.json"
        path.write_text("{ broken", encoding="utf-8")
        assert len(RunStore(path)) == 0

    def test_malformed_entries_are_skipped(self, tmp_path):
        path = tmp_path / "history.json"
        path.write_text(json.dumps({"runs": [{"command": "x"}, {"run_id": "1", "command": "invert", "exit_code": 0}]}))
        assert [r.run_id for r in RunStore(path).recent_runs()] == ["1"]

    def test_reporter_output(self, tmp_path, capsys):
        store = RunStore(tmp_path / "history.json")
        Reporter(store).display_recent_runs()
        assert "No recent runs" in capsys.readouterr().out
        store.record_run(RunRecord(run_id="1", command="invert", exit_code=0, status="optimal", objective=0.25, gap=0.0))
        Reporter(store).display_recent_runs()
        out = capsys.readouterr().out
        assert "invert" in out and "optimal" in out and "0.25" in out
