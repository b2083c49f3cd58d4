"""Unit tests for gradient-based inversion"""

import threading

import numpy as np
import pytest
from pydantic import ValidationError

from src.adjoint.gradient_search import Adam, AdjointConfig, adjoint_invert, stacked_objective
from src.bounds.interval import interval_bounds
from src.encoding.encoder import encode_problem
from src.encoding.problem import InverseProblem, LinearConstraintSpec
from src.errors import DimensionError, ProblemError
from src.milp.branch_and_bound import solve_milp
from src.milp.model import ConstraintSense
from src.network.model import Activation, Layer, Network


@pytest.fixture
def doubling_net() -> Network:
    return Network([Layer([[2.0]], [0.0], Activation.LINEAR)])


@pytest.fixture
def abs_net() -> Network:
    """|x| via relu(x) + relu(-x); target 0.5 has optima at +-0.5"""
    return Network([
        Layer([[1.0], [-1.0]], [0.0, 0.0], Activation.RELU),
        Layer([[1.0, 1.0]], [0.0], Activation.LINEAR),
    ])


class TestAdjointConfig:
    """Settings validation"""

    def test_defaults(self):
        config = AdjointConfig()
        assert config.max_iters == 2000
        assert config.patience == 10
        assert config.learning_rate == 1e-2

    def test_restarts_must_be_positive(self):
        with pytest.raises(ValidationError):
            AdjointConfig(restarts=0)

    def test_initial_points_same_length(self):
        with pytest.raises(ValidationError):
            AdjointConfig(initial_points=[[0.1], [0.1, 0.2]])


class TestAdam:
    """Adam step"""

    def test_first_step_moves_by_learning_rate(self):
        optimizer = Adam((2,), lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        theta = optimizer.step(np.array([1.0, 1.0]), np.array([3.0, -0.5]))
        np.testing.assert_allclose(theta, [0.9, 1.1], atol=1e-6)


class TestAdjointInvert:
    """Gradient inversion with restarts"""

    def test_linear_scalar(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0])
        result = adjoint_invert(doubling_net, problem, AdjointConfig(restarts=3, learning_rate=1e-3))
        assert result.designs[0][0] == pytest.approx(0.5, abs=5e-3)
        assert result.objective <= 1e-2

    def test_symmetric_optima_match_milp(self, abs_net):
        problem = InverseProblem(targets=[[0.5]], lower=[-1.0], upper=[1.0])
        config = AdjointConfig(
            restarts=1, learning_rate=1e-4, max_iters=20000, patience=100, initial_points=[[0.3]]
        )
        result = adjoint_invert(abs_net, problem, config)
        encoded = encode_problem(abs_net, interval_bounds(abs_net, [-1.0], [1.0]), problem)
        optimum = solve_milp(encoded.model).incumbent_obj
        assert abs(abs(result.designs[0][0]) - 0.5) <= 1e-3
        assert result.objective <= optimum + 1e-4

    def test_designs_stay_in_box(self, make_net):
        net = make_net(3, (6,), 2, seed=17)
        problem = InverseProblem(targets=[[5.0, -5.0], [0.0, 0.0]], lower=[0.0, -0.5, 0.2], upper=[0.3, 0.5, 0.4])
        result = adjoint_invert(net, problem, AdjointConfig(restarts=2, learning_rate=0.1, max_iters=200))
        for design in result.designs:
            assert np.all(design >= problem.lower_array)
            assert np.all(design <= problem.upper_array)
        assert result.objective == pytest.approx(stacked_objective(net, np.array(result.designs), problem.target_arrays))

    def test_restart_records_and_callback(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0])
        seen = []
        result = adjoint_invert(
            doubling_net, problem, AdjointConfig(restarts=4, max_iters=50), on_restart=lambda d, v: seen.append(v)
        )
        assert len(result.trace) == 4
        assert len(seen) == 4
        assert result.objective == pytest.approx(min(seen))

    def test_seeded_runs_are_identical(self, make_net):
        net = make_net(2, (4,), 1, seed=3)
        problem = InverseProblem(targets=[[0.3]], lower=[-1.0, -1.0], upper=[1.0, 1.0])
        config = AdjointConfig(restarts=2, max_iters=100, seed=9)
        first = adjoint_invert(net, problem, config)
        second = adjoint_invert(net, problem, config)
        assert np.array_equal(first.designs[0], second.designs[0])

    def test_stop_event_before_start(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0])
        stop = threading.Event()
        stop.set()
        result = adjoint_invert(doubling_net, problem, stop_event=stop)
        assert result.trace == []
        assert result.designs[0].tolist() == [0.5]

    def test_rejects_selection(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0], selection_budget=1)
        with pytest.raises(ProblemError):
            adjoint_invert(doubling_net, problem)

    def test_rejects_integer_flags(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0], integer=[True])
        with pytest.raises(ProblemError):
            adjoint_invert(doubling_net, problem)

    def test_rejects_extra_constraints(self, doubling_net):
        constraint = LinearConstraintSpec(coeffs=[1.0], sense=ConstraintSense.LE, rhs=0.5)
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0], extra_constraints=[constraint])
        with pytest.raises(ProblemError, match="box constraints"):
            adjoint_invert(doubling_net, problem)

    def test_initial_point_length(self, doubling_net):
        problem = InverseProblem(targets=[[1.0]], lower=[0.0], upper=[1.0])
        with pytest.raises(DimensionError):
            adjoint_invert(doubling_net, problem, AdjointConfig(initial_points=[[0.1, 0.2]]))
