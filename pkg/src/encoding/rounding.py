"""Rounding a continuous design to the nearest feasible integer design"""

import math
from typing import Optional

import numpy as np
from loguru import logger

from ..milp.branch_and_bound import BnbConfig, SolveStatus, solve_milp
from ..milp.model import ConstraintSense, MilpModel, ObjectiveSense, VarKind
from .problem import InverseProblem


def nearest_feasible_integer(
    problem: InverseProblem, point, config: Optional[BnbConfig] = None
) -> Optional[np.ndarray]:
    """
    L1-nearest design to ``point`` that is integral on the problem's integer inputs

    The result lies in the design box and satisfies the extra linear
    constraints, unlike plain rounding. Continuous inputs may move too when
    the constraints couple them to the integer ones.

    Args:
        problem: Box, integrality flags and extra constraints
        point: Continuous design to round
        config: Solver settings for the small rounding MILP

    Returns:
        The rounded design, or None when no feasible integer design exists
    """
    point = np.asarray(point, dtype=float)
    flags = problem.integer_flags
    model = MilpModel(name="rounding")
    xs = []
    for i, (lo, hi) in enumerate(zip(problem.lower_array, problem.upper_array)):
        kind = VarKind.INTEGER if flags[i] else VarKind.CONTINUOUS
        if kind is VarKind.INTEGER:
            lo, hi = math.ceil(lo - 1e-9), math.floor(hi + 1e-9)
        xs.append(model.add_var(f"x0[{i}]", kind, lower=float(lo), upper=float(hi)))
    for idx, spec in enumerate(problem.extra_constraints):
        model.add_constraint(zip(xs, spec.coeffs), spec.sense, spec.rhs, name=f"design[{idx}]")
    objective = []
    for i, x in enumerate(xs):
        # r_i >= |x_i - point_i|
        r = model.add_var(f"r[{i}]", lower=0.0, upper=math.inf)
        model.add_constraint([(r, 1.0), (x, -1.0)], ConstraintSense.GE, -point[i])
        model.add_constraint([(r, 1.0), (x, 1.0)], ConstraintSense.GE, point[i])
        objective.append((r, 1.0))
    model.set_objective(objective, ObjectiveSense.MINIMIZE)

    report = solve_milp(model, config)
    if report.status is SolveStatus.INFEASIBLE or not report.has_incumbent:
        logger.warning("No feasible integer design near the continuous optimum")
        return None
    rounded = report.x[xs].copy()
    rounded[flags] = np.round(rounded[flags])
    return rounded
