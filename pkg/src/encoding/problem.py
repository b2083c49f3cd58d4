"""Inverse problem definition and problem file format (see agent_docs/file_formats.md)"""

import json
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import DimensionError, InfeasibleProblemError, ProblemError
from ..milp.model import ConstraintSense
from ..network.model import Network
from ..network.io import format_location

PROBLEM_FORMAT_VERSION = 1


class LinearConstraintSpec(BaseModel):
    """``sum_i coeffs[i] * x0_i <sense> rhs`` over the design inputs"""
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    coeffs: List[float]
    sense: ConstraintSense
    rhs: float

    def violation(self, x0: np.ndarray) -> float:
        lhs = float(np.dot(self.coeffs, x0))
        if self.sense is ConstraintSense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is ConstraintSense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


class RobustnessSpec(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    candidate: List[float]
    epsilon: float = Field(default=1e-3, ge=0)


class InverseProblem(BaseModel):
    """Everything an inversion needs beyond the network itself"""
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    format_version: int = PROBLEM_FORMAT_VERSION
    targets: List[List[float]] = Field(min_length=1)
    lower: List[float]
    upper: List[float]
    integer: Optional[List[bool]] = None
    selection_budget: Optional[int] = None
    robustness: Optional[RobustnessSpec] = None
    extra_constraints: List[LinearConstraintSpec] = Field(default_factory=list)
    scale: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "InverseProblem":
        if self.format_version != PROBLEM_FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {self.format_version}")
        m = len(self.lower)
        if m == 0:
            raise ValueError("design box needs at least one input")
        if len(self.upper) != m:
            raise ValueError(f"upper has {len(self.upper)} entries, lower has {m}")
        n = len(self.targets[0])
        for i, target in enumerate(self.targets):
            if len(target) != n or n == 0:
                raise ValueError(f"targets[{i}] has {len(target)} entries, expected {n}")
        if self.integer is not None and len(self.integer) != m:
            raise ValueError(f"integer has {len(self.integer)} flags for {m} inputs")
        if self.scale is not None:
            if len(self.scale) != m:
                raise ValueError(f"scale has {len(self.scale)} entries for {m} inputs")
            if any(s <= 0 for s in self.scale):
                raise ValueError("scale factors must be positive")
        for i, constraint in enumerate(self.extra_constraints):
            if len(constraint.coeffs) != m:
                raise ValueError(f"extra_constraints[{i}] has {len(constraint.coeffs)} coefficients for {m} inputs")
        if self.selection_budget is not None:
            if self.robustness is not None:
                raise ValueError("selection and robustness cannot be combined")
            if any(lo < 0 for lo in self.lower):
                raise ValueError("selection requires nonnegative lower bounds")
        if self.robustness is not None and len(self.robustness.candidate) != m:
            raise ValueError(f"robustness candidate has {len(self.robustness.candidate)} entries for {m} inputs")
        return self

    # -- views ----------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return len(self.lower)

    @property
    def output_dim(self) -> int:
        return len(self.targets[0])

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.array(self.upper, dtype=float)

    @property
    def target_arrays(self) -> List[np.ndarray]:
        return [np.array(t, dtype=float) for t in self.targets]

    @property
    def integer_flags(self) -> np.ndarray:
        if self.integer is None:
            return np.zeros(self.input_dim, dtype=bool)
        return np.array(self.integer, dtype=bool)

    @property
    def is_integer(self) -> bool:
        return bool(self.integer_flags.any())

    @property
    def scale_array(self) -> np.ndarray:
        if self.scale is None:
            return np.ones(self.input_dim)
        return np.array(self.scale, dtype=float)

    @property
    def is_empty_box(self) -> bool:
        return bool(np.any(self.lower_array > self.upper_array))

    def check_against(self, net: Network) -> None:
        """Raise DimensionError unless the problem fits ``net``'s input and output widths"""
        if self.input_dim != net.input_dim:
            raise DimensionError(f"problem has {self.input_dim} design inputs, network expects {net.input_dim}", layer=0)
        if self.output_dim != net.output_dim:
            raise DimensionError(
                f"targets have {self.output_dim} entries, network outputs {net.output_dim}",
                layer=net.depth - 1,
            )

    def require_nonempty_box(self) -> None:
        if self.is_empty_box:
            k = int(np.flatnonzero(self.lower_array > self.upper_array)[0])
            raise InfeasibleProblemError(
                f"design box is empty: lower {self.lower[k]} > upper {self.upper[k]}", location=f"lower[{k}]"
            )

    def extra_violation(self, x0: np.ndarray) -> float:
        """Largest violation of the extra linear design constraints at ``x0``"""
        return max((c.violation(x0) for c in self.extra_constraints), default=0.0)

    def with_box(self, lower: np.ndarray, upper: np.ndarray) -> "InverseProblem":
        return self.model_copy(update={"lower": [float(v) for v in lower], "upper": [float(v) for v in upper]})

    def with_targets(self, targets: List[np.ndarray]) -> "InverseProblem":
        return self.model_copy(update={"targets": [[float(v) for v in t] for t in targets]})

    def continuous(self) -> "InverseProblem":
        """The same problem with all integrality flags dropped"""
        return self.model_copy(update={"integer": None})


class CandidateFile(BaseModel):
    """One or more candidate designs to assess for robustness"""
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    format_version: int = PROBLEM_FORMAT_VERSION
    candidates: List[List[float]] = Field(min_length=1)
    labels: Optional[List[str]] = None


def _validate(model_cls, document: dict, source: str):
    try:
        return model_cls.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        location = format_location(first["loc"]) or source
        raise ProblemError(first["msg"], location=location) from e


def _read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ProblemError(f"invalid JSON: {e.msg}", location=f"{path.name}:{e.lineno}:{e.colno}") from e
    except OSError as e:
        raise ProblemError(f"cannot read file: {e}", location=str(path)) from e


def load_problem(path: Union[str, Path]) -> InverseProblem:
    """
    Load and validate a problem file

    An empty design box is not a parse error; callers check
    ``is_empty_box`` and report the problem as infeasible.

    Raises:
        ProblemError: unreadable JSON or schema violation
    """
    path = Path(path)
    problem = _validate(InverseProblem, _read_json(path), path.name)
    logger.debug(f"Loaded problem from {path}: {problem.n_targets} target(s), {problem.input_dim} inputs")
    return problem


def save_problem(problem: InverseProblem, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(problem.model_dump(mode="json", exclude_none=True), f, indent=2)
    return path


def load_candidates(path: Union[str, Path]) -> CandidateFile:
    path = Path(path)
    candidates = _validate(CandidateFile, _read_json(path), path.name)
    if candidates.labels is not None and len(candidates.labels) != len(candidates.candidates):
        raise ProblemError("labels and candidates differ in length", location="labels")
    return candidates


def robustness_box(candidate, epsilon: float, lower=None, upper=None):
    """
    The epsilon-hypercube around ``candidate``, intersected with the design box when given

    Returns:
        (lower, upper) arrays of the perturbation box

    Raises:
        InfeasibleProblemError: empty intersection
    """
    center = np.asarray(candidate, dtype=float)
    if epsilon < 0:
        raise ProblemError(f"epsilon must be nonnegative, got {epsilon}", location="robustness.epsilon")
    lo, hi = center - epsilon, center + epsilon
    if lower is not None:
        lo = np.maximum(lo, np.asarray(lower, dtype=float))
    if upper is not None:
        hi = np.minimum(hi, np.asarray(upper, dtype=float))
    if np.any(lo > hi):
        k = int(np.flatnonzero(lo > hi)[0])
        raise InfeasibleProblemError(f"epsilon box around the candidate misses the design box at input {k}")
    return lo, hi
