"""Inverse-design and robustness queries as MILP models.

One network copy is encoded per target; copies share only the selection
binaries. The L1 objective uses residual variables ``s_j``: an epigraph pair
for minimization, a binary disjunction for the robustness maximization.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..bounds.table import BoundsTable, Stability
from ..errors import DimensionError, EncodingError
from ..milp.model import ConstraintSense, MilpModel, ObjectiveSense, VarKind
from ..network.model import Network, forward, preactivations
from .problem import InverseProblem, RobustnessSpec, robustness_box
from .relu import NodeVars, encode_layers

_BOX_TOL = 1e-12


class EncodingMode(str, Enum):
    INVERSE = "inverse"
    ROBUSTNESS = "robustness"


@dataclass
class EncodedProblem:
    """A MilpModel plus the map from network quantities to its variables"""
    model: MilpModel
    network: Network
    problem: InverseProblem
    mode: EncodingMode
    inputs: List[List[int]]
    layers: List[List[List[NodeVars]]]
    residuals: List[List[int]]
    selection: List[int] = field(default_factory=list)
    directions: List[List[int]] = field(default_factory=list)

    @property
    def n_copies(self) -> int:
        return len(self.inputs)

    @property
    def targets(self) -> List[np.ndarray]:
        return self.problem.target_arrays

    def output_vars(self, copy: int = 0) -> List[int]:
        return [node.value for node in self.layers[copy][-1]]

    def var_map(self) -> Dict[int, Tuple]:
        """Role of every model variable, e.g. ``("input", copy, i)`` or ``("binary", copy, l, k)``"""
        roles: Dict[int, Tuple] = {}

        def claim(var: int, role: Tuple) -> None:
            if var in roles:
                raise EncodingError(f"variable {var} mapped twice: {roles[var]} and {role}")
            roles[var] = role

        for c in range(self.n_copies):
            for i, var in enumerate(self.inputs[c]):
                claim(var, ("input", c, i))
            for l, nodes in enumerate(self.layers[c]):
                for k, node in enumerate(nodes):
                    if node.value is not None:
                        claim(node.value, ("node", c, l, k))
                    if node.binary is not None:
                        claim(node.binary, ("binary", c, l, k))
            for j, var in enumerate(self.residuals[c]):
                claim(var, ("residual", c, j))
            for j, var in enumerate(self.directions[c] if self.directions else []):
                claim(var, ("direction", c, j))
        for i, var in enumerate(self.selection):
            claim(var, ("selection", i))
        return roles


@dataclass
class DecodedSolution:
    designs: List[np.ndarray]
    layer_values: List[List[np.ndarray]]
    selected: List[int]
    objective: float


def _check_inputs(net: Network, bounds: BoundsTable, problem: InverseProblem, lower: np.ndarray, upper: np.ndarray) -> None:
    problem.check_against(net)
    bounds.validate_for(net)
    if np.any(lower < bounds.design_lower - _BOX_TOL) or np.any(upper > bounds.design_upper + _BOX_TOL):
        raise EncodingError("bounds were computed for a design box that does not contain this problem's box")


def _add_copy(
    model: MilpModel, net: Network, bounds: BoundsTable, lower: np.ndarray, upper: np.ndarray, prefix: str
) -> Tuple[List[int], List[List[NodeVars]]]:
    inputs = [
        model.add_var(f"{prefix}x0[{i}]", lower=float(lo), upper=float(hi))
        for i, (lo, hi) in enumerate(zip(lower, upper))
    ]
    layers = encode_layers(model, net, bounds.lower, bounds.upper, inputs, prefix=prefix)
    return inputs, layers


def encode_inverse(net: Network, bounds: BoundsTable, problem: InverseProblem) -> EncodedProblem:
    """
    Encode ``min sum_c ||F(x0_c) - t_c||_1`` over the design box

    One network copy per target, each with its own design inputs, big-M
    ReLU constraints and residuals. The extra linear design constraints
    hold for every copy.

    Args:
        net: Network to invert
        bounds: Preactivation bounds valid over the problem's design box
        problem: Targets, box and design constraints (no robustness field)

    Returns:
        EncodedProblem with a minimization model

    Raises:
        EncodingError: robustness query, bounds missing/crossed or computed for a smaller box
    """
    if problem.robustness is not None:
        raise EncodingError("robustness queries are encoded with encode_robustness")
    problem.require_nonempty_box()
    lower, upper = problem.lower_array, problem.upper_array
    _check_inputs(net, bounds, problem, lower, upper)

    model = MilpModel(name="inverse")
    inputs, layers, residuals = [], [], []
    objective = []
    for c, target in enumerate(problem.target_arrays):
        prefix = f"t{c}."
        copy_inputs, copy_layers = _add_copy(model, net, bounds, lower, upper, prefix)
        copy_residuals = []
        for j, node in enumerate(copy_layers[-1]):
            s = model.add_var(f"{prefix}s[{j}]", lower=0.0, upper=math.inf)
            # s >= y - t and s >= t - y
            model.add_constraint([(s, 1.0), (node.value, -1.0)], ConstraintSense.GE, -target[j], name=f"{prefix}res_pos[{j}]")
            model.add_constraint([(s, 1.0), (node.value, 1.0)], ConstraintSense.GE, target[j], name=f"{prefix}res_neg[{j}]")
            copy_residuals.append(s)
            objective.append((s, 1.0))
        for idx, spec in enumerate(problem.extra_constraints):
            model.add_constraint(zip(copy_inputs, spec.coeffs), spec.sense, spec.rhs, name=f"{prefix}design[{idx}]")
        inputs.append(copy_inputs)
        layers.append(copy_layers)
        residuals.append(copy_residuals)

    model.set_objective(objective, ObjectiveSense.MINIMIZE)
    encoded = EncodedProblem(model, net, problem, EncodingMode.INVERSE, inputs, layers, residuals)
    logger.debug(f"Encoded inverse problem: {model!r}")
    return encoded


def add_selection(encoded: EncodedProblem, budget: int) -> EncodedProblem:
    """
    Limit the number of nonzero design inputs to ``budget``

    Adds binaries ``q`` shared by every target copy, ``sum q <= budget`` and
    ``x0_i <= upper_i * q_i`` (``0 <= x0_i <= q_i`` on a unit box).

    Raises:
        EncodingError: budget outside ``[1, K0]`` or a negative lower bound
    """
    k0 = encoded.problem.input_dim
    if budget < 1 or budget > k0:
        raise EncodingError(f"selection budget {budget} outside [1, {k0}]")
    if np.any(encoded.problem.lower_array < 0):
        raise EncodingError("selection requires design lower bounds >= 0")
    model = encoded.model
    q = [model.add_var(f"q[{i}]", VarKind.BINARY) for i in range(k0)]
    model.add_constraint([(qi, 1.0) for qi in q], ConstraintSense.LE, float(budget), name="budget")
    for c, inputs in enumerate(encoded.inputs):
        for i, var in enumerate(inputs):
            cap = model.variables[var].upper
            model.add_constraint([(var, 1.0), (q[i], -cap)], ConstraintSense.LE, 0.0, name=f"t{c}.select[{i}]")
    encoded.selection = q
    return encoded


def encode_integer_design(encoded: EncodedProblem, flags: Optional[Sequence[bool]] = None) -> EncodedProblem:
    """
    Turn flagged design inputs into general-integer variables in every copy

    Args:
        encoded: Problem from ``encode_inverse``
        flags: Per-input integrality flags (the problem's own by default)

    Raises:
        EncodingError: a flagged input has an infinite bound
    """
    flags = encoded.problem.integer_flags if flags is None else np.asarray(flags, dtype=bool)
    if len(flags) != encoded.problem.input_dim:
        raise DimensionError(f"{len(flags)} integer flags for {encoded.problem.input_dim} inputs", layer=0)
    model = encoded.model
    for inputs in encoded.inputs:
        for i in np.flatnonzero(flags):
            var = model.variables[inputs[i]]
            if not (math.isfinite(var.lower) and math.isfinite(var.upper)):
                raise EncodingError(f"integer design input {i} needs finite bounds")
            model.set_kind(inputs[i], VarKind.INTEGER)
    return encoded


def encode_problem(net: Network, bounds: BoundsTable, problem: InverseProblem) -> EncodedProblem:
    """Inverse encoding plus selection and integrality as the problem asks"""
    encoded = encode_inverse(net, bounds, problem)
    if problem.selection_budget is not None:
        add_selection(encoded, problem.selection_budget)
    if problem.is_integer:
        encode_integer_design(encoded)
    return encoded


def encode_robustness(
    net: Network,
    bounds: BoundsTable,
    candidate: Sequence[float],
    epsilon: float,
    target: Sequence[float],
    design_lower: Optional[Sequence[float]] = None,
    design_upper: Optional[Sequence[float]] = None,
) -> EncodedProblem:
    """
    Encode ``max ||F(x0) - t||_1`` over the epsilon-box around ``candidate``

    Each output gets a binary ``d_j`` choosing ``s_j = y_j - t_j`` or
    ``s_j = t_j - y_j``; the big-M comes from the output-layer bounds, so the
    maximum is the exact worst-case deviation.

    Args:
        net: Network
        bounds: Bounds valid over the perturbation box (see bounds_for_robustness)
        candidate: Nominal design
        epsilon: Half-width of the perturbation hypercube
        target: Target performance t
        design_lower: Optional design box the perturbation must stay in
        design_upper: Optional design box the perturbation must stay in

    Raises:
        InfeasibleProblemError: the epsilon-box misses the design box
        EncodingError: bounds unusable for this box
    """
    lower, upper = robustness_box(candidate, epsilon, design_lower, design_upper)
    t = np.asarray(target, dtype=float)
    problem = InverseProblem(
        targets=[t.tolist()],
        lower=lower.tolist(),
        upper=upper.tolist(),
        robustness=RobustnessSpec(candidate=[float(v) for v in candidate], epsilon=epsilon),
    )
    _check_inputs(net, bounds, problem, lower, upper)

    model = MilpModel(name="robustness")
    prefix = "t0."
    inputs, layers = _add_copy(model, net, bounds, lower, upper, prefix)
    residuals, directions, objective = [], [], []
    for j, node in enumerate(layers[-1]):
        reach = max(abs(bounds.lower[-1][j] - t[j]), abs(bounds.upper[-1][j] - t[j]))
        big_m = 2.0 * reach
        s = model.add_var(f"{prefix}s[{j}]", lower=0.0, upper=reach)
        d = model.add_var(f"{prefix}d[{j}]", VarKind.BINARY)
        # d = 1: s <= y - t ; d = 0: s <= t - y
        model.add_constraint(
            [(s, 1.0), (node.value, -1.0), (d, big_m)], ConstraintSense.LE, -t[j] + big_m, name=f"{prefix}dev_pos[{j}]"
        )
        model.add_constraint(
            [(s, 1.0), (node.value, 1.0), (d, -big_m)], ConstraintSense.LE, t[j], name=f"{prefix}dev_neg[{j}]"
        )
        residuals.append(s)
        directions.append(d)
        objective.append((s, 1.0))

    model.set_objective(objective, ObjectiveSense.MAXIMIZE)
    encoded = EncodedProblem(
        model, net, problem, EncodingMode.ROBUSTNESS, [inputs], [layers], [residuals], directions=[directions]
    )
    logger.debug(f"Encoded robustness problem (epsilon={epsilon}): {model!r}")
    return encoded


def decode(encoded: EncodedProblem, x: Sequence[float]) -> DecodedSolution:
    """Design inputs, layer values and selected inputs of an assignment"""
    x = np.asarray(x, dtype=float)
    designs = [x[inputs].copy() for inputs in encoded.inputs]
    layer_values = []
    for nodes_per_layer in encoded.layers:
        layer_values.append(
            [np.array([0.0 if n.value is None else x[n.value] for n in nodes]) for nodes in nodes_per_layer]
        )
    selected = [i for i, q in enumerate(encoded.selection) if x[q] > 0.5]
    return DecodedSolution(designs, layer_values, selected, encoded.model.objective_value(x))


def resimulation_error(encoded: EncodedProblem, x: Sequence[float]) -> float:
    """Largest gap between decoded layer values and a forward pass from the decoded design"""
    decoded = decode(encoded, x)
    worst = 0.0
    for design, values in zip(decoded.designs, decoded.layer_values):
        for encoded_value, true_value in zip(values, forward(encoded.network, design)):
            worst = max(worst, float(np.max(np.abs(encoded_value - true_value))))
    return worst


def lift_assignment(encoded: EncodedProblem, designs: Sequence[Sequence[float]]) -> np.ndarray:
    """
    Complete MILP assignment induced by design inputs (one per copy)

    Layer variables come from a forward pass, activation binaries from the
    actual pattern, residuals from the true deviations and selection
    binaries from the nonzero inputs.

    Raises:
        DimensionError: wrong number of designs or design length
    """
    if len(designs) != encoded.n_copies:
        raise DimensionError(f"{len(designs)} designs for {encoded.n_copies} network copies")
    x = np.zeros(encoded.model.num_vars)
    nonzero = np.zeros(encoded.problem.input_dim, dtype=bool)
    for c, design in enumerate(designs):
        x0 = np.asarray(design, dtype=float)
        x[encoded.inputs[c]] = x0
        nonzero |= x0 > 0.0
        pres = preactivations(encoded.network, x0)
        for nodes, pre in zip(encoded.layers[c], pres):
            for k, node in enumerate(nodes):
                if node.value is None:
                    continue
                if node.stability is Stability.UNSTABLE:
                    x[node.value] = max(pre[k], 0.0)
                    x[node.binary] = 1.0 if pre[k] > 0.0 else 0.0
                else:
                    x[node.value] = pre[k]
        deviation = pres[-1] - encoded.targets[c]
        x[encoded.residuals[c]] = np.abs(deviation)
        if encoded.directions:
            x[encoded.directions[c]] = (deviation >= 0.0).astype(float)
    if encoded.selection:
        x[encoded.selection] = nonzero.astype(float)
    return x
