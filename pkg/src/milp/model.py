"""Generic MILP data model: variables, sparse linear constraints, linear objective"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ModelError


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class ConstraintSense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class ObjectiveSense(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


Coeffs = Tuple[Tuple[int, float], ...]


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lower: float
    upper: float

    @property
    def is_integral(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    coeffs: Coeffs
    sense: ConstraintSense
    rhs: float
    name: str = ""


def _merge(coeffs: Iterable[Tuple[int, float]]) -> Coeffs:
    """Sum duplicate indices and drop exact zeros, keeping first-seen order"""
    merged: Dict[int, float] = {}
    for index, value in coeffs:
        merged[int(index)] = merged.get(int(index), 0.0) + float(value)
    return tuple((i, v) for i, v in merged.items() if v != 0.0)


class MilpModel:
    """Mutable builder for a mixed-integer linear program.

    Solvers treat a model as read-only; encoders build a fresh one per
    problem.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: Coeffs = ()
        self.objective_constant: float = 0.0
        self.sense: ObjectiveSense = ObjectiveSense.MINIMIZE

    # -- building -------------------------------------------------------

    def add_var(
        self,
        name: str,
        kind: VarKind = VarKind.CONTINUOUS,
        lower: float = 0.0,
        upper: float = math.inf,
    ) -> int:
        """Add a variable and return its index"""
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lower, upper = max(0.0, lower), min(1.0, upper)
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        return len(self.variables) - 1

    def add_constraint(
        self,
        coeffs: Iterable[Tuple[int, float]],
        sense: ConstraintSense,
        rhs: float,
        name: str = "",
    ) -> int:
        """Add ``sum coeffs <sense> rhs`` and return the constraint index"""
        constraint = Constraint(_merge(coeffs), ConstraintSense(sense), float(rhs), name or f"c{len(self.constraints)}")
        self.constraints.append(constraint)
        return len(self.constraints) - 1

    def set_objective(
        self,
        coeffs: Iterable[Tuple[int, float]],
        sense: ObjectiveSense = ObjectiveSense.MINIMIZE,
        constant: float = 0.0,
    ) -> None:
        self.objective = _merge(coeffs)
        self.sense = ObjectiveSense(sense)
        self.objective_constant = float(constant)

    def set_kind(self, index: int, kind: VarKind) -> None:
        var = self.variables[index]
        lower, upper = var.lower, var.upper
        if kind is VarKind.INTEGER:
            lower, upper = math.ceil(lower - 1e-9), math.floor(upper + 1e-9)
        self.variables[index] = Variable(var.name, VarKind(kind), float(lower), float(upper))

    def set_bounds(self, index: int, lower: float, upper: float) -> None:
        var = self.variables[index]
        self.variables[index] = Variable(var.name, var.kind, float(lower), float(upper))

    def copy(self, name: Optional[str] = None) -> "MilpModel":
        clone = MilpModel(name or self.name)
        clone.variables = list(self.variables)
        clone.constraints = list(self.constraints)
        clone.objective = self.objective
        clone.objective_constant = self.objective_constant
        clone.sense = self.sense
        return clone

    # -- inspection -----------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def integer_indices(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.is_integral]

    def count(self, kind: VarKind) -> int:
        return sum(1 for v in self.variables if v.kind is kind)

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for index, value in self.objective:
            c[index] += value
        return c

    def constraint_matrix(self) -> Tuple[np.ndarray, List[ConstraintSense], np.ndarray]:
        """Dense ``(A, senses, b)`` view of the constraints"""
        A = np.zeros((self.num_constraints, self.num_vars))
        for row, constraint in enumerate(self.constraints):
            for index, value in constraint.coeffs:
                A[row, index] += value
        senses = [c.sense for c in self.constraints]
        b = np.array([c.rhs for c in self.constraints], dtype=float)
        return A, senses, b

    def objective_value(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(value * x[index] for index, value in self.objective) + self.objective_constant)

    def max_violation(self, x: Sequence[float]) -> Tuple[float, str]:
        """Largest absolute bound or constraint violation of ``x`` and where it occurs"""
        x = np.asarray(x, dtype=float)
        worst, where = 0.0, ""
        for var, value in zip(self.variables, x):
            excess = max(var.lower - value, value - var.upper, 0.0)
            if excess > worst:
                worst, where = excess, f"bound of {var.name}"
        for constraint in self.constraints:
            lhs = sum(value * x[index] for index, value in constraint.coeffs)
            if constraint.sense is ConstraintSense.LE:
                excess = lhs - constraint.rhs
            elif constraint.sense is ConstraintSense.GE:
                excess = constraint.rhs - lhs
            else:
                excess = abs(lhs - constraint.rhs)
            if excess > worst:
                worst, where = excess, constraint.name
        return worst, where

    def max_fractionality(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        indices = self.integer_indices
        if not indices:
            return 0.0
        values = x[indices]
        return float(np.max(np.abs(values - np.round(values))))

    def validate(self) -> None:
        """Raise ModelError unless the model is well formed"""
        for i, var in enumerate(self.variables):
            if math.isnan(var.lower) or math.isnan(var.upper):
                raise ModelError(f"variable {var.name} has NaN bound")
            if var.kind is VarKind.BINARY and (var.lower < 0.0 or var.upper > 1.0):
                raise ModelError(f"binary variable {var.name} must have bounds within [0, 1]")
            if var.kind is VarKind.INTEGER and not (math.isfinite(var.lower) and math.isfinite(var.upper)):
                raise ModelError(f"integer variable {var.name} needs finite bounds")
        for constraint in self.constraints:
            if not math.isfinite(constraint.rhs):
                raise ModelError(f"constraint {constraint.name} has non-finite rhs")
            for index, value in constraint.coeffs:
                if not 0 <= index < self.num_vars:
                    raise ModelError(f"constraint {constraint.name} references unknown variable {index}")
                if not math.isfinite(value):
                    raise ModelError(f"constraint {constraint.name} has non-finite coefficient")
        for index, value in self.objective:
            if not 0 <= index < self.num_vars:
                raise ModelError(f"objective references unknown variable {index}")
            if not math.isfinite(value):
                raise ModelError("objective has non-finite coefficient")

    def __repr__(self) -> str:
        return (
            f"MilpModel({self.name}: {self.num_vars} vars "
            f"[{self.count(VarKind.BINARY)} bin, {self.count(VarKind.INTEGER)} int], "
            f"{self.num_constraints} constraints)"
        )
