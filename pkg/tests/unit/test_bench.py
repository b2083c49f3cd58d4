"""Unit tests for the scalability sweep helpers"""

import numpy as np
import pytest

from src.bounds.tightening import BoundsConfig
from src.cli.bench import SUMMARY_COLUMNS, bench_instance, rank_correlation, run_bench, summarize, sweep_sizes
from src.config import BenchConfig
from src.milp.branch_and_bound import BnbConfig


class TestInstances:
    """Seeded synthetic instances"""

    def test_instances_are_reproducible(self):
        config = BenchConfig(input_dim=3, output_dim=2)
        net_a, problem_a, seed_a = bench_instance(config, 2, 5, 0)
        net_b, problem_b, seed_b = bench_instance(config, 2, 5, 0)
        assert seed_a == seed_b
        assert net_a == net_b
        assert problem_a.targets == problem_b.targets

    def test_instances_differ_by_repeat(self):
        config = BenchConfig()
        assert bench_instance(config, 2, 5, 0)[2] != bench_instance(config, 2, 5, 1)[2]

    def test_shapes(self):
        config = BenchConfig(input_dim=3, output_dim=2)
        net, problem, _ = bench_instance(config, 3, 7, 0)
        assert net.widths == [7, 7, 7, 2]
        assert problem.lower == [0.0] * 3 and problem.upper == [1.0] * 3

    def test_sweep_sizes(self):
        config = BenchConfig(depths=[2, 3], depth_width=10, widths=[10, 20], width_depth=1)
        assert sweep_sizes(config, "depth") == [(2, 10), (3, 10)]
        assert sweep_sizes(config, "width") == [(1, 10), (1, 20)]
        with pytest.raises(ValueError):
            sweep_sizes(config, "height")


class TestRunBench:
    """A tiny sweep end to end"""

    def test_rows_and_summary(self):
        config = BenchConfig(depths=[1, 2], depth_width=3, widths=[3], input_dim=2, output_dim=1, repeats=2)
        seen = []
        rows = run_bench(config, BoundsConfig(cache_dir=None), BnbConfig(), sweeps=["depth"], on_row=seen.append)
        assert len(rows) == 4 == len(seen)
        assert all(row["status"] == "optimal" for row in rows)
        summary = summarize(rows)
        assert [(s["depth"], s["runs"]) for s in summary] == [(1, 2), (2, 2)]
        assert set(summary[0]) == set(SUMMARY_COLUMNS)


class TestSummaries:
    """Aggregation and trend statistics"""

    def test_summarize(self):
        rows = [
            {"sweep": "width", "depth": 1, "width": 10, "solve_time": 1.0, "gap": 0.0, "unstable": 4},
            {"sweep": "width", "depth": 1, "width": 10, "solve_time": 3.0, "gap": 1e-7, "unstable": 6},
        ]
        (entry,) = summarize(rows)
        assert entry["mean_time"] == 2.0
        assert entry["gap"] == 1e-7
        assert entry["mean_unstable"] == 5.0

    def test_rank_correlation_monotone(self):
        assert rank_correlation([1, 2, 3, 4], [0.1, 0.5, 0.7, 9.0]) == pytest.approx(1.0)
        assert rank_correlation([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_rank_correlation_ties(self):
        value = rank_correlation([1, 2, 3], [1.0, 1.0, 2.0])
        assert 0.0 < value < 1.0
        assert np.isfinite(value)

    def test_rank_correlation_constant(self):
        assert rank_correlation([1, 2, 3], [5, 5, 5]) == 0.0
