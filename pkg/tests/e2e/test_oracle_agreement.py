"""
End-to-end agreement between the MILP pipeline (bounds, encoding, branch
and bound) and the brute-force oracles on seeded random networks.

Run with: pytest tests/e2e -m slow
"""

import itertools

import numpy as np
import pytest

from src.bounds.tightening import BoundsConfig, compute_bounds
from src.encoding.encoder import decode, encode_problem
from src.encoding.problem import InverseProblem, LinearConstraintSpec
from src.encoding.rounding import nearest_feasible_integer
from src.milp.branch_and_bound import BnbConfig, SolveStatus, solve_milp
from src.milp.model import ConstraintSense
from src.network.model import Activation, Layer, Network, evaluate, l1_objective
from src.network.synthetic import random_network
from src.oracle.enumeration import enumerate_lattice, enumerate_patterns, enumerate_selection

SOLVER = BnbConfig(time_limit=120)
TIGHT = BoundsConfig(t_max=5.0, cache_dir=None)
LOOSE = BoundsConfig(tighten=False, cache_dir=None)


def solve(net, problem, bounds_config=TIGHT):
    bounds = compute_bounds(net, problem.lower_array, problem.upper_array, problem.extra_constraints, bounds_config, SOLVER)
    encoded = encode_problem(net, bounds, problem)
    report = solve_milp(encoded.model, SOLVER)
    assert report.status is SolveStatus.OPTIMAL
    return encoded, report


def reachable_target(net, rng, lower, upper):
    """Output of a random design, nudged so it is usually not exactly reachable"""
    x = rng.uniform(lower, upper)
    return (evaluate(net, x) + rng.normal(0.0, 0.1, net.output_dim)).tolist()


def subset_objectives(net, problem, budget):
    """Optimum with the inputs outside each size-``budget`` subset fixed to zero"""
    k0 = problem.input_dim
    values = {}
    for subset in itertools.combinations(range(k0), budget):
        upper = np.where(np.isin(np.arange(k0), subset), problem.upper_array, 0.0)
        restricted = problem.with_box(problem.lower_array, upper).model_copy(update={"selection_budget": None})
        values[subset] = enumerate_patterns(net, restricted).objective
    return values


@pytest.mark.slow
class TestContinuousAgreement:
    """Continuous inversion against activation-pattern enumeration"""

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("hidden", [(5, 4), (4, 4, 3)], ids=["two_hidden", "three_hidden"])
    @pytest.mark.parametrize("bounds_config", [TIGHT, LOOSE], ids=["tightened", "interval"])
    def test_matches_pattern_enumeration(self, seed, hidden, bounds_config):
        rng = np.random.default_rng(seed)
        net = random_network(3, list(hidden), 2, seed=seed)
        lower, upper = [-1.0] * 3, [1.0] * 3
        problem = InverseProblem(targets=[reachable_target(net, rng, lower, upper)], lower=lower, upper=upper)

        encoded, report = solve(net, problem, bounds_config)
        oracle = enumerate_patterns(net, problem)
        assert report.incumbent_obj == pytest.approx(oracle.objective, abs=1e-6)

        (design,) = decode(encoded, report.x).designs
        assert l1_objective(net, design, problem.targets[0]) == pytest.approx(report.incumbent_obj, abs=1e-6)

    def test_pattern_feasible_at_a_single_point(self):
        # y = |x0| + |x1| + 1; the all-inactive pattern only holds at the origin
        net = Network([
            Layer([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0] * 4, Activation.RELU),
            Layer([[1.0, 1.0, 1.0, 1.0]], [1.0], Activation.LINEAR),
        ])
        problem = InverseProblem(targets=[[0.5]], lower=[-1.0, -1.0], upper=[1.0, 1.0])

        encoded, report = solve(net, problem, LOOSE)
        oracle = enumerate_patterns(net, problem)
        assert oracle.objective == pytest.approx(0.5, abs=1e-9)
        assert oracle.designs[0] == pytest.approx([0.0, 0.0], abs=1e-9)
        assert report.incumbent_obj == pytest.approx(0.5, abs=1e-6)
        (design,) = decode(encoded, report.x).designs
        assert design == pytest.approx([0.0, 0.0], abs=1e-6)

    @pytest.mark.parametrize("seed", range(4))
    def test_multi_target_with_design_constraint(self, seed):
        rng = np.random.default_rng(100 + seed)
        net = random_network(2, [6], 1, seed=100 + seed)
        lower, upper = [-1.0, -1.0], [1.0, 1.0]
        problem = InverseProblem(
            targets=[reachable_target(net, rng, lower, upper) for _ in range(2)],
            lower=lower,
            upper=upper,
            extra_constraints=[LinearConstraintSpec(coeffs=[1.0, 1.0], sense=ConstraintSense.LE, rhs=0.5)],
        )
        encoded, report = solve(net, problem)
        assert report.incumbent_obj == pytest.approx(enumerate_patterns(net, problem).objective, abs=1e-6)
        for design in decode(encoded, report.x).designs:
            assert design.sum() <= 0.5 + 1e-7


@pytest.mark.slow
class TestSelectionAgreement:
    """Budgeted selection shared by two targets against subset enumeration"""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_subset_enumeration(self, seed):
        rng = np.random.default_rng(200 + seed)
        net = random_network(6, [5], 2, seed=200 + seed)
        lower, upper = [0.0] * 6, [1.0] * 6
        targets = [reachable_target(net, rng, lower, upper) for _ in range(2)]

        optimum = {}
        for budget in (1, 2):
            problem = InverseProblem(targets=targets, lower=lower, upper=upper, selection_budget=budget)
            encoded, report = solve(net, problem)
            oracle = enumerate_selection(net, problem)
            assert report.incumbent_obj == pytest.approx(oracle.objective, abs=1e-6)
            decoded = decode(encoded, report.x)
            assert len(decoded.selected) <= budget

            ranked = sorted(subset_objectives(net, problem, budget).values())
            if ranked[1] - ranked[0] > 1e-4:
                support = {i for design in decoded.designs for i in np.flatnonzero(np.abs(design) > 1e-7)}
                assert support == set(oracle.subset)
            optimum[budget] = report.incumbent_obj

        assert optimum[2] <= optimum[1] + 1e-6


@pytest.mark.slow
class TestIntegerAgreement:
    """Integer design against lattice enumeration and rounding"""

    def test_integer_optimum_beats_rounding(self):
        # f(x) = 10|x - 0.4| - 15.5 relu(x - 1) + 20 relu(x - 2): continuous optimum 0 at x = 0.4,
        # which rounds to x = 0 with f = 4, while x = 2 gives f = 0.5
        net = Network([
            Layer([[1.0], [-1.0], [1.0], [1.0]], [-0.4, 0.4, -1.0, -2.0], Activation.RELU),
            Layer([[10.0, 10.0, -15.5, 20.0]], [0.0], Activation.LINEAR),
        ])
        problem = InverseProblem(targets=[[0.0]], lower=[0.0], upper=[3.0], integer=[True])

        continuous, relaxed = solve(net, problem.continuous(), LOOSE)
        (point,) = decode(continuous, relaxed.x).designs
        assert relaxed.incumbent_obj == pytest.approx(0.0, abs=1e-6)
        assert point == pytest.approx([0.4], abs=1e-6)

        rounded = nearest_feasible_integer(problem, point)
        assert rounded == pytest.approx([0.0])
        rounded_obj = l1_objective(net, rounded, problem.targets[0])
        assert rounded_obj == pytest.approx(4.0)

        encoded, report = solve(net, problem, LOOSE)
        (design,) = decode(encoded, report.x).designs
        assert design == pytest.approx([2.0], abs=1e-6)
        assert report.incumbent_obj == pytest.approx(0.5, abs=1e-6)
        assert report.incumbent_obj < rounded_obj - 1.0
        assert report.incumbent_obj == pytest.approx(enumerate_lattice(net, problem).objective, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_lattice_and_never_loses_to_rounding(self, seed):
        rng = np.random.default_rng(300 + seed)
        net = random_network(3, [6], 1, seed=300 + seed, bias_scale=0.5)
        lower, upper = [0.0] * 3, [4.0] * 3
        problem = InverseProblem(
            targets=[reachable_target(net, rng, lower, upper)], lower=lower, upper=upper, integer=[True] * 3
        )
        encoded, report = solve(net, problem)
        oracle = enumerate_lattice(net, problem)
        assert oracle.regions_solved == 125
        assert report.incumbent_obj == pytest.approx(oracle.objective, abs=1e-6)
        (design,) = decode(encoded, report.x).designs
        assert design == pytest.approx(np.round(design), abs=1e-6)

        continuous, relaxed = solve(net, problem.continuous())
        (point,) = decode(continuous, relaxed.x).designs
        rounded = nearest_feasible_integer(problem, point)
        assert rounded is not None
        assert relaxed.incumbent_obj <= report.incumbent_obj + 1e-6
        assert report.incumbent_obj <= l1_objective(net, rounded, problem.targets[0]) + 1e-6
