"""Neural-adjoint inversion: Adam on the design inputs with random restarts.

Loss per restart is the summed L1 deviation over all targets plus a
quadratic penalty for leaving the design box. Every iterate is projected
onto the box before it is scored, so the returned design is always
feasible for the box.
"""

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from ..encoding.problem import InverseProblem
from ..errors import DimensionError, ProblemError
from ..network.model import Network, evaluate, gradient


class AdjointConfig(BaseModel):
    """Gradient-search settings"""
    restarts: int = Field(default=5, ge=1)
    max_iters: int = Field(default=2000, ge=1)
    patience: int = Field(default=10, ge=1)
    improvement_tol: float = Field(default=1e-6, ge=0)
    learning_rate: float = Field(default=1e-2, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    boundary_penalty_weight: float = Field(default=10.0, ge=0)
    seed: int = Field(default=0, ge=0)
    initial_points: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _check_points(self) -> "AdjointConfig":
        if self.initial_points is not None:
            widths = {len(p) for p in self.initial_points}
            if len(widths) > 1:
                raise ValueError("initial_points must all have the same length")
        return self


@dataclass
class RestartRecord:
    restart: int
    iterations: int
    objective: float
    elapsed: float


@dataclass
class AdjointResult:
    designs: List[np.ndarray]
    objective: float
    restarts: List[RestartRecord] = field(default_factory=list)

    @property
    def trace(self) -> List[RestartRecord]:
        return self.restarts


class Adam:
    """Adam update on a single numpy array"""

    def __init__(self, shape, lr: float, beta1: float, beta2: float, eps: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def stacked_objective(net: Network, designs: np.ndarray, targets: Sequence[np.ndarray]) -> float:
    """Summed L1 deviation of one design per target"""
    return float(sum(np.abs(evaluate(net, x) - t).sum() for x, t in zip(designs, targets)))


def _penalty_gradient(x: np.ndarray, lower: np.ndarray, upper: np.ndarray, weight: float) -> np.ndarray:
    # d/dx of weight * (max(0, x - u)^2 + max(0, l - x)^2)
    return 2.0 * weight * (np.maximum(x - upper, 0.0) - np.maximum(lower - x, 0.0))


def _check_problem(net: Network, problem: InverseProblem) -> None:
    problem.check_against(net)
    problem.require_nonempty_box()
    if problem.selection_budget is not None or problem.is_integer:
        raise ProblemError("gradient inversion handles continuous problems without a selection budget only")
    if problem.extra_constraints:
        raise ProblemError("gradient inversion handles box constraints only", location="extra_constraints")
    if problem.robustness is not None:
        raise ProblemError("gradient inversion does not solve robustness queries", location="robustness")


def adjoint_invert(
    net: Network,
    problem: InverseProblem,
    config: Optional[AdjointConfig] = None,
    stop_event: Optional[threading.Event] = None,
    on_restart: Optional[Callable[[List[np.ndarray], float], None]] = None,
) -> AdjointResult:
    """
    Box-constrained gradient inversion with random restarts

    Args:
        net: Network to invert
        problem: Continuous problem (no selection, integrality or extra constraints)
        config: Optimizer settings
        stop_event: When set, the search returns its best design so far
        on_restart: Called with (designs, objective) after each restart

    Returns:
        AdjointResult holding the best projected designs (one per target)

    Raises:
        ProblemError: problem outside the method's scope
        DimensionError: initial point of the wrong length
    """
    config = config or AdjointConfig()
    _check_problem(net, problem)
    lower, upper = problem.lower_array, problem.upper_array
    targets = problem.target_arrays
    shape = (problem.n_targets, problem.input_dim)
    rng = np.random.default_rng(config.seed)
    initial = config.initial_points or []
    if initial and len(initial[0]) != problem.input_dim:
        raise DimensionError(f"initial points have {len(initial[0])} entries, problem has {problem.input_dim} inputs")

    best_designs: Optional[np.ndarray] = None
    best = np.inf
    records = []
    started = time.perf_counter()

    for restart in range(config.restarts):
        if stop_event is not None and stop_event.is_set():
            break
        if restart < len(initial):
            theta = np.tile(np.clip(np.asarray(initial[restart], dtype=float), lower, upper), (shape[0], 1))
        else:
            theta = rng.uniform(lower, upper, size=shape)
        optimizer = Adam(shape, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
        restart_designs = np.clip(theta, lower, upper)
        restart_best = stacked_objective(net, restart_designs, targets)
        stall = 0
        iterations = 0
        for iterations in range(1, config.max_iters + 1):
            if stop_event is not None and stop_event.is_set():
                break
            grad = np.stack([gradient(net, x, t) for x, t in zip(theta, targets)])
            grad = grad + _penalty_gradient(theta, lower, upper, config.boundary_penalty_weight)
            theta = optimizer.step(theta, grad)
            projected = np.clip(theta, lower, upper)
            value = stacked_objective(net, projected, targets)
            if value < restart_best - config.improvement_tol:
                restart_best, restart_designs, stall = value, projected, 0
            else:
                stall += 1
                if stall >= config.patience:
                    break

        records.append(RestartRecord(restart, iterations, restart_best, time.perf_counter() - started))
        logger.debug(f"Adjoint restart {restart}: objective {restart_best:.6g} after {iterations} iterations")
        if restart_best < best:
            best, best_designs = restart_best, restart_designs
        if on_restart is not None:
            on_restart([x.copy() for x in restart_designs], restart_best)

    if best_designs is None:
        # stopped before the first restart
        best_designs = np.tile((lower + upper) / 2.0, (shape[0], 1))
        best = stacked_objective(net, best_designs, targets)
    logger.info(f"Adjoint search finished: best objective {best:.6g} over {len(records)} restart(s)")
    return AdjointResult([x.copy() for x in best_designs], best, records)
