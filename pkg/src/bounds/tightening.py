"""Layer-by-layer MILP bound tightening.

For each layer, every node's preactivation is minimized and maximized over
the encoding of all earlier layers (built from the bounds committed so far)
plus the design box and extra design constraints. Subproblems of one layer
are independent and run on a thread pool; the layer is committed before the
next one is encoded. A subproblem stopped by its time budget contributes its
relaxed bound, never its incumbent.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from ..encoding.problem import LinearConstraintSpec, robustness_box
from ..encoding.relu import encode_layers, preactivation_terms
from ..errors import BoundsError
from ..milp.branch_and_bound import BnbConfig, BranchAndBound, SolveStatus
from ..milp.model import MilpModel, ObjectiveSense
from ..network.model import Activation, Network
from .interval import interval_bounds, repropagate
from .table import BoundsTable, Provenance, Stability


class BoundsConfig(BaseModel):
    """Bound precomputation settings"""
    t_max: float = Field(default=150.0, gt=0)
    jobs: int = Field(default=1, ge=1)
    tighten: bool = True
    cache_dir: Optional[str] = "logs/bounds_cache"


def _layer_model(
    net: Network,
    table: BoundsTable,
    layer: int,
    extra_constraints: Sequence[LinearConstraintSpec],
) -> Tuple[MilpModel, list]:
    """Design box, design constraints and layers ``0..layer-1``; returns the model and layer ``layer-1``'s variables"""
    model = MilpModel(name=f"bounds[{layer}]")
    inputs = [
        model.add_var(f"x0[{i}]", lower=float(lo), upper=float(hi))
        for i, (lo, hi) in enumerate(zip(table.design_lower, table.design_upper))
    ]
    for idx, spec in enumerate(extra_constraints):
        model.add_constraint(zip(inputs, spec.coeffs), spec.sense, spec.rhs, name=f"design[{idx}]")
    encoded = encode_layers(model, net, table.lower, table.upper, inputs, n_layers=layer)
    previous = [node.value for node in encoded[-1]] if encoded else list(inputs)
    return model, previous


def _optimize(base: MilpModel, terms, bias: float, sense: ObjectiveSense, solver: BnbConfig) -> Tuple[float, bool]:
    """Relaxed bound on the node's preactivation in direction ``sense`` and whether it was solved to optimality"""
    model = base.copy()
    model.set_objective(terms, sense, constant=bias)
    report = BranchAndBound(model, solver).solve()
    if report.status is SolveStatus.INFEASIBLE:
        raise BoundsError(f"{base.name}: node subproblem infeasible although the design domain is not empty")
    if not math.isfinite(report.relaxed_bound):
        raise BoundsError(f"{base.name}: node subproblem has no finite relaxed bound ({report.status.value})")
    scale = abs(report.incumbent_obj) if report.incumbent_obj is not None else abs(report.relaxed_bound)
    # pruning tolerances make the reported bound exact only up to the gap tolerance
    pad = max(solver.abs_gap_tol, solver.gap_tol * scale)
    bound = report.relaxed_bound - pad if sense is ObjectiveSense.MINIMIZE else report.relaxed_bound + pad
    return bound, report.status is SolveStatus.OPTIMAL


def _tighten_node(args) -> Tuple[float, float, bool, float]:
    base, terms, bias, solver = args
    started = time.perf_counter()
    lower, exact_lo = _optimize(base, terms, bias, ObjectiveSense.MINIMIZE, solver)
    upper, exact_hi = _optimize(base, terms, bias, ObjectiveSense.MAXIMIZE, solver)
    return lower, upper, exact_lo and exact_hi, time.perf_counter() - started


def _needs_milp(net: Network, table: BoundsTable, layer: int, node: int, has_constraints: bool) -> bool:
    lo, hi = table.lower[layer][node], table.upper[layer][node]
    if lo >= hi:
        return False
    if layer == 0 and not has_constraints:
        # an affine image of a box is exact under interval arithmetic
        return False
    if net.layers[layer].activation is Activation.RELU:
        return table.stability(layer, node) is Stability.UNSTABLE
    return True


def tighten_bounds(
    net: Network,
    design_lower,
    design_upper,
    extra_constraints: Sequence[LinearConstraintSpec] = (),
    config: Optional[BoundsConfig] = None,
    solver: Optional[BnbConfig] = None,
) -> BoundsTable:
    """
    Per-node MILP bounds over a design domain, layer by layer

    Args:
        net: Network
        design_lower: Lower corner of the design box
        design_upper: Upper corner of the design box
        extra_constraints: Linear design constraints that further restrict the domain
        config: Time budget per subproblem (``t_max``) and worker count (``jobs``)
        solver: Branch-and-bound tolerances; its time limit is replaced by ``t_max``

    Returns:
        BoundsTable never looser than interval bounds

    Raises:
        BoundsError: a node subproblem is infeasible (internal inconsistency)
    """
    config = config or BoundsConfig()
    solver = (solver or BnbConfig()).model_copy(update={"time_limit": config.t_max, "node_limit": None})
    table = interval_bounds(net, design_lower, design_upper)
    started = time.perf_counter()
    logger.info(f"Tightening bounds of {net!r} (t_max={config.t_max}s, jobs={config.jobs})")

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        for l, layer in enumerate(net.layers):
            candidates = [
                k for k in range(layer.out_dim) if _needs_milp(net, table, l, k, bool(extra_constraints))
            ]
            if not candidates:
                continue
            base, previous = _layer_model(net, table, l, extra_constraints)
            jobs = []
            for k in candidates:
                terms, bias = preactivation_terms(layer, k, previous)
                jobs.append((base, terms, bias, solver))

            results = list(pool.map(_tighten_node, jobs))
            before = table.unstable_count
            for k, (lower, upper, exact, elapsed) in zip(candidates, results):
                lo = max(table.lower[l][k], lower)
                hi = min(table.upper[l][k], upper)
                table.lower[l][k] = min(lo, hi)
                table.upper[l][k] = hi
                table.provenance[l][k] = Provenance.MILP_EXACT if exact else Provenance.MILP_RELAXED
                table.compute_time[l][k] = elapsed
            repropagate(net, table, l + 1)
            logger.info(
                f"Committed layer {l}: {len(candidates)} node(s) tightened, "
                f"unstable ReLUs {before} -> {table.unstable_count}"
            )

    table.meta.update({"method": "milp", "t_max": config.t_max, "wall_time": time.perf_counter() - started})
    return table


def compute_bounds(
    net: Network,
    design_lower,
    design_upper,
    extra_constraints: Sequence[LinearConstraintSpec] = (),
    config: Optional[BoundsConfig] = None,
    solver: Optional[BnbConfig] = None,
) -> BoundsTable:
    """Interval or MILP-tightened bounds depending on ``config.tighten``"""
    config = config or BoundsConfig()
    if config.tighten:
        return tighten_bounds(net, design_lower, design_upper, extra_constraints, config, solver)
    table = interval_bounds(net, design_lower, design_upper)
    table.meta.update({"method": "interval"})
    return table


def bounds_for_robustness(
    net: Network,
    candidate,
    epsilon: float,
    design_lower=None,
    design_upper=None,
    config: Optional[BoundsConfig] = None,
    solver: Optional[BnbConfig] = None,
) -> BoundsTable:
    """
    Bounds over the epsilon-box around ``candidate`` intersected with the design box

    The smaller domain usually stabilizes many more ReLUs than the full box.

    Raises:
        InfeasibleProblemError: empty intersection
    """
    lower, upper = robustness_box(candidate, epsilon, design_lower, design_upper)
    table = compute_bounds(net, lower, upper, (), config, solver)
    table.meta.update({"epsilon": float(epsilon), "candidate": [float(v) for v in np.asarray(candidate)]})
    return table
