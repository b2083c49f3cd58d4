"""Brute-force references for the MILP encodings.

Nothing here uses branch-and-bound or the big-M constraints. Activation
patterns are enumerated explicitly; for a fixed pattern the network is an
affine map of the design, so each pattern is one LP over the design inputs
with sign constraints on the preactivations. Patterns are explored layer by
layer and a prefix whose region is already empty is not extended.
"""

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..bounds.interval import interval_bounds
from ..bounds.table import Stability, classify
from ..encoding.problem import InverseProblem, LinearConstraintSpec, robustness_box
from ..errors import InfeasibleProblemError, OracleLimitError, ProblemError
from ..milp.model import ConstraintSense, MilpModel, ObjectiveSense
from ..milp.simplex import LpStatus, solve_lp
from ..network.model import Network, evaluate

MAX_UNSTABLE = 16
MAX_SUBSETS = 10_000
MAX_LATTICE_POINTS = 100_000

# sign constraints on preactivations: rows of (coefficients over x0, constant, sense)
Row = Tuple[np.ndarray, float, ConstraintSense]


@dataclass
class OracleResult:
    objective: float
    designs: List[np.ndarray]
    regions_solved: int = 0
    subset: Optional[Tuple[int, ...]] = None


class _RegionSolver:
    """LPs over the design box restricted by design constraints and sign rows"""

    def __init__(self, lower: np.ndarray, upper: np.ndarray, extra_constraints: Sequence[LinearConstraintSpec]):
        self.lower = lower
        self.upper = upper
        self.extra = list(extra_constraints)
        self.solved = 0

    def solve(self, rows: List[Row], output: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None):
        """Minimize the L1 deviation of ``G x + g`` from ``t`` (or just test feasibility) over the region.

        Returns ``(objective, x0)`` or None when the region is empty.
        """
        m = self.lower.shape[0]
        model = MilpModel(name="pattern")
        xs = [model.add_var(f"x0[{i}]", lower=float(self.lower[i]), upper=float(self.upper[i])) for i in range(m)]
        for idx, spec in enumerate(self.extra):
            model.add_constraint(zip(xs, spec.coeffs), spec.sense, spec.rhs, name=f"design[{idx}]")
        for r, (coeffs, constant, sense) in enumerate(rows):
            model.add_constraint(zip(xs, coeffs), sense, -constant, name=f"sign[{r}]")
        if output is not None:
            G, g, t = output
            objective = []
            for j in range(G.shape[0]):
                s = model.add_var(f"s[{j}]", lower=0.0, upper=math.inf)
                model.add_constraint([(s, 1.0)] + [(x, -w) for x, w in zip(xs, G[j])], ConstraintSense.GE, g[j] - t[j])
                model.add_constraint([(s, 1.0)] + [(x, w) for x, w in zip(xs, G[j])], ConstraintSense.GE, t[j] - g[j])
                objective.append((s, 1.0))
            model.set_objective(objective, ObjectiveSense.MINIMIZE)
        self.solved += 1
        result = solve_lp(model)
        if result.status is not LpStatus.OPTIMAL:
            return None
        return result.objective, result.x[:m].copy()


def _best_for_target(
    net: Network, lower: np.ndarray, upper: np.ndarray, extra, target: np.ndarray, max_unstable: int
) -> Tuple[float, Optional[np.ndarray], int]:
    table = interval_bounds(net, lower, upper)
    if table.unstable_count > max_unstable:
        raise OracleLimitError(f"{table.unstable_count} unstable ReLUs exceed the enumeration limit of {max_unstable}")
    solver = _RegionSolver(lower, upper, extra)
    hidden = net.layers[:-1]
    best = [math.inf, None]

    def explore(layer_index: int, P: np.ndarray, p: np.ndarray, rows: List[Row]) -> None:
        if layer_index == len(hidden):
            out = net.layers[-1]
            result = solver.solve(rows, (out.weights @ P, out.weights @ p + out.bias, target))
            if result is not None and result[0] < best[0]:
                best[0], best[1] = result
            return
        layer = hidden[layer_index]
        G = layer.weights @ P
        g = layer.weights @ p + layer.bias
        fixed = np.zeros(layer.out_dim, dtype=bool)
        free = []
        for k in range(layer.out_dim):
            stability = classify(table.lower[layer_index][k], table.upper[layer_index][k])
            if stability is Stability.UNSTABLE:
                free.append(k)
            else:
                fixed[k] = stability is Stability.STABLY_ACTIVE
        for bits in itertools.product((False, True), repeat=len(free)):
            active = fixed.copy()
            new_rows = list(rows)
            for k, on in zip(free, bits):
                active[k] = on
                sense = ConstraintSense.GE if on else ConstraintSense.LE
                new_rows.append((G[k], float(g[k]), sense))
            if free and solver.solve(new_rows) is None:
                continue
            explore(layer_index + 1, G * active[:, None], g * active, new_rows)

    m = net.input_dim
    if solver.solve([]) is None:
        return math.inf, None, solver.solved
    explore(0, np.eye(m), np.zeros(m), [])
    return best[0], best[1], solver.solved


def enumerate_patterns(net: Network, problem: InverseProblem, max_unstable: int = MAX_UNSTABLE) -> OracleResult:
    """
    Global optimum of the continuous inversion by activation-pattern enumeration

    Selection budgets and integrality flags are not applied (see
    enumerate_selection and enumerate_lattice). Targets are independent,
    so the optimum is the sum of per-target optima.

    Args:
        net: Network
        problem: Targets, design box and extra linear constraints
        max_unstable: Refuse networks with more unstable ReLUs (per interval bounds)

    Returns:
        OracleResult with the optimum objective and one optimal design per target

    Raises:
        OracleLimitError: too many unstable ReLUs
        InfeasibleProblemError: the design domain is empty
    """
    problem.check_against(net)
    problem.require_nonempty_box()
    lower, upper = problem.lower_array, problem.upper_array
    total, designs, regions = 0.0, [], 0
    for target in problem.target_arrays:
        objective, design, solved = _best_for_target(net, lower, upper, problem.extra_constraints, target, max_unstable)
        regions += solved
        if design is None:
            raise InfeasibleProblemError("design box and extra constraints admit no point")
        total += objective
        designs.append(design)
    logger.debug(f"Pattern enumeration: optimum {total:.6g} after {regions} region LPs")
    return OracleResult(total, designs, regions)


def enumerate_selection(
    net: Network,
    problem: InverseProblem,
    budget: Optional[int] = None,
    max_subsets: int = MAX_SUBSETS,
    max_unstable: int = MAX_UNSTABLE,
) -> OracleResult:
    """
    Best input subset of size at most ``budget`` by enumerating all subsets

    Inputs outside a subset are fixed to zero; subsets of exactly the budget
    size cover all smaller ones because a selected input may still be zero.

    Raises:
        OracleLimitError: more than ``max_subsets`` subsets
        ProblemError: no budget or negative lower bounds
    """
    budget = problem.selection_budget if budget is None else budget
    if budget is None or budget < 1:
        raise ProblemError("selection enumeration needs a budget >= 1")
    k0 = problem.input_dim
    size = min(budget, k0)
    count = math.comb(k0, size)
    if count > max_subsets:
        raise OracleLimitError(f"{count} subsets exceed the enumeration limit of {max_subsets}")
    lower, upper = problem.lower_array, problem.upper_array
    if np.any(lower < 0):
        raise ProblemError("selection requires nonnegative lower bounds")

    best: Optional[OracleResult] = None
    regions = 0
    for subset in itertools.combinations(range(k0), size):
        outside = np.ones(k0, dtype=bool)
        outside[list(subset)] = False
        if np.any(lower[outside] > 0):
            continue
        restricted = problem.with_box(lower, np.where(outside, 0.0, upper)).model_copy(update={"selection_budget": None})
        try:
            result = enumerate_patterns(net, restricted, max_unstable)
        except InfeasibleProblemError:
            continue
        regions += result.regions_solved
        if best is None or result.objective < best.objective - 1e-12:
            best = OracleResult(result.objective, result.designs, 0, subset=subset)
    if best is None:
        raise InfeasibleProblemError("no input subset admits a feasible design")
    best.regions_solved = regions
    return best


def enumerate_lattice(
    net: Network,
    problem: InverseProblem,
    max_points: int = MAX_LATTICE_POINTS,
    max_unstable: int = MAX_UNSTABLE,
    tol: float = 1e-9,
) -> OracleResult:
    """
    Integer-constrained optimum by enumerating every integer point of the box

    Continuous inputs (if any) are optimized by pattern enumeration with the
    integer inputs fixed.

    Raises:
        OracleLimitError: more than ``max_points`` lattice points
        ProblemError: combined with a selection budget
        InfeasibleProblemError: no lattice point satisfies the design constraints
    """
    if problem.selection_budget is not None:
        raise ProblemError("lattice enumeration does not combine with a selection budget")
    problem.check_against(net)
    flags = problem.integer_flags
    lower, upper = problem.lower_array, problem.upper_array
    ranges = [
        range(math.ceil(lower[i] - tol), math.floor(upper[i] + tol) + 1) if flags[i] else None
        for i in range(problem.input_dim)
    ]
    integer_ranges = [r for r in ranges if r is not None]
    count = math.prod(len(r) for r in integer_ranges) if integer_ranges else 1
    if count > max_points:
        raise OracleLimitError(f"{count} lattice points exceed the enumeration limit of {max_points}")

    index = np.flatnonzero(flags)
    all_integer = bool(flags.all())
    total, designs, checked = 0.0, [], 0
    for target in problem.target_arrays:
        best_value, best_design = math.inf, None
        for point in itertools.product(*integer_ranges):
            checked += 1
            if all_integer:
                x0 = np.array(point, dtype=float)
                if problem.extra_violation(x0) > tol:
                    continue
                value = float(np.abs(evaluate(net, x0) - target).sum())
            else:
                lo, hi = lower.copy(), upper.copy()
                lo[index] = point
                hi[index] = point
                single = problem.with_box(lo, hi).with_targets([target])
                try:
                    result = enumerate_patterns(net, single.continuous(), max_unstable)
                except InfeasibleProblemError:
                    continue
                value, x0 = result.objective, result.designs[0]
            if value < best_value - 1e-12:
                best_value, best_design = value, x0
        if best_design is None:
            raise InfeasibleProblemError("no integer design satisfies the design constraints")
        total += best_value
        designs.append(best_design)
    return OracleResult(total, designs, checked)


def sample_robustness(
    net: Network,
    candidate: Sequence[float],
    epsilon: float,
    target: Sequence[float],
    n_samples: int = 1000,
    seed: int = 0,
    design_lower=None,
    design_upper=None,
    max_vertex_dim: int = 12,
) -> float:
    """
    Largest sampled L1 deviation within the epsilon-box around ``candidate``

    Uniform samples plus, for at most ``max_vertex_dim`` inputs, every vertex
    of the box. A lower bound on the exact worst case.
    """
    lower, upper = robustness_box(candidate, epsilon, design_lower, design_upper)
    t = np.asarray(target, dtype=float)
    rng = np.random.default_rng(seed)

    def deviation(x0: np.ndarray) -> float:
        return float(np.abs(evaluate(net, x0) - t).sum())

    worst = deviation(np.clip(np.asarray(candidate, dtype=float), lower, upper))
    for x0 in rng.uniform(lower, upper, size=(n_samples, lower.shape[0])):
        worst = max(worst, deviation(x0))
    if lower.shape[0] <= max_vertex_dim:
        for vertex in itertools.product(*zip(lower, upper)):
            worst = max(worst, deviation(np.array(vertex, dtype=float)))
    return worst
