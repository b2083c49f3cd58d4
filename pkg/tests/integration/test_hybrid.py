"""
Integration tests for the hybrid solve: branch-and-bound with gradient
incumbents injected while it runs.
"""

import math

import pytest

from src.adjoint.gradient_search import AdjointConfig, adjoint_invert
from src.adjoint.hybrid import TRACE_COLUMNS, hybrid_solve
from src.bounds.interval import interval_bounds
from src.encoding.encoder import encode_problem, lift_assignment
from src.encoding.problem import InverseProblem
from src.errors import ProblemError
from src.milp.branch_and_bound import BnbConfig, BranchAndBound, SolveStatus, TraceSource, solve_milp

FAST_ADJOINT = AdjointConfig(restarts=3, max_iters=300, patience=20, learning_rate=5e-2, seed=7)


def box_problem(net, target, lo=-1.0, hi=1.0) -> InverseProblem:
    return InverseProblem(
        targets=[list(target)], lower=[lo] * net.input_dim, upper=[hi] * net.input_dim
    )


class TestHybridSolve:
    """Joint runs on small networks"""

    @pytest.mark.asyncio
    async def test_matches_plain_branch_and_bound(self, make_net):
        net = make_net(3, (6, 5), 2, seed=11)
        problem = box_problem(net, [0.2, -0.1])
        bounds = interval_bounds(net, problem.lower, problem.upper)

        result = await hybrid_solve(net, bounds, problem, FAST_ADJOINT, BnbConfig(time_limit=60))
        plain = solve_milp(encode_problem(net, bounds, problem).model, BnbConfig(time_limit=60))

        assert result.report.status is SolveStatus.OPTIMAL
        assert result.report.incumbent_obj == pytest.approx(plain.incumbent_obj, abs=1e-6)

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_gradient_incumbent_reaches_gap_no_later(self, make_net, seed):
        # node counts instead of wall time: the tree search is deterministic once the incumbent is in place
        net = make_net(3, (8, 6), 2, seed=seed)
        problem = box_problem(net, [0.2, -0.1])
        encoded = encode_problem(net, interval_bounds(net, problem.lower, problem.upper), problem)
        config = BnbConfig(time_limit=60, gap_tol=0.01)

        plain = BranchAndBound(encoded.model, config).solve()
        adjoint = adjoint_invert(net, problem, FAST_ADJOINT)
        warm = BranchAndBound(encoded.model, config)
        assert warm.inject_incumbent(lift_assignment(encoded, adjoint.designs), TraceSource.ADJOINT).accepted
        report = warm.solve()

        assert plain.gap <= 0.01 and report.gap <= 0.01
        assert report.nodes_explored <= plain.nodes_explored
        assert report.incumbent_obj <= adjoint.objective + 1e-6

    @pytest.mark.asyncio
    async def test_trace_reaches_one_percent_gap(self, make_net):
        net = make_net(3, (8, 6), 2, seed=11)
        problem = box_problem(net, [0.2, -0.1])
        bounds = interval_bounds(net, problem.lower, problem.upper)
        result = await hybrid_solve(net, bounds, problem, FAST_ADJOINT, BnbConfig(time_limit=60, gap_tol=0.01))

        assert result.report.gap <= 0.01
        reached = result.trace.first_time_below(0.01)
        assert reached is not None and reached <= result.report.wall_time

    @pytest.mark.asyncio
    async def test_final_objective_not_worse_than_gradient(self, toy_net):
        problem = box_problem(toy_net, [0.4])
        bounds = interval_bounds(toy_net, problem.lower, problem.upper)
        result = await hybrid_solve(toy_net, bounds, problem, FAST_ADJOINT, BnbConfig(time_limit=30))

        assert result.adjoint is not None
        assert result.report.incumbent_obj <= result.adjoint.objective + 1e-6
        for injection in result.injections:
            assert isinstance(injection["accepted"], bool)
            if not injection["accepted"]:
                assert injection["reason"]

    @pytest.mark.asyncio
    async def test_trace_is_time_ordered_and_monotone(self, make_net):
        net = make_net(2, (8,), 1, seed=3)
        problem = box_problem(net, [0.05])
        bounds = interval_bounds(net, problem.lower, problem.upper)
        result = await hybrid_solve(net, bounds, problem, FAST_ADJOINT, BnbConfig(time_limit=30))

        events = result.trace.events
        assert events
        times = [e.time_s for e in events]
        assert times == sorted(times)
        incumbents = [e.incumbent_obj for e in events if e.incumbent_obj is not None]
        assert all(b <= a + 1e-12 for a, b in zip(incumbents, incumbents[1:]))
        assert {e.source for e in events} <= set(TraceSource)
        assert result.report.incumbent_obj == pytest.approx(incumbents[-1])

    @pytest.mark.asyncio
    async def test_trace_csv(self, toy_net, tmp_path):
        problem = box_problem(toy_net, [0.4])
        bounds = interval_bounds(toy_net, problem.lower, problem.upper)
        result = await hybrid_solve(toy_net, bounds, problem, FAST_ADJOINT, BnbConfig(time_limit=30))

        lines = result.trace.to_csv(tmp_path / "trace.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == len(result.trace) + 1
        first_gap = result.trace.first_time_below(math.inf)
        assert first_gap is not None and first_gap >= 0.0

    @pytest.mark.asyncio
    async def test_rejects_selection(self, toy_net):
        problem = InverseProblem(targets=[[0.4]], lower=[0.0, 0.0], upper=[1.0, 1.0], selection_budget=1)
        bounds = interval_bounds(toy_net, problem.lower, problem.upper)
        with pytest.raises(ProblemError):
            await hybrid_solve(toy_net, bounds, problem, FAST_ADJOINT)

    @pytest.mark.asyncio
    async def test_rejects_integer_designs(self, toy_net):
        problem = InverseProblem(targets=[[0.4]], lower=[0.0, 0.0], upper=[2.0, 2.0], integer=[True, False])
        bounds = interval_bounds(toy_net, problem.lower, problem.upper)
        with pytest.raises(ProblemError):
            await hybrid_solve(toy_net, bounds, problem, FAST_ADJOINT)
