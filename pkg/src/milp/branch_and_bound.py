"""Best-bound branch-and-bound over binary and general-integer variables.

Internally every model is minimized (maximization objectives are negated);
reports convert back to the model's own sense. The open-node queue is a heap
keyed by (relaxed bound, creation order) so runs are deterministic.
"""

import heapq
import math
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from ..errors import DimensionError, InvalidIncumbentError
from .model import MilpModel, ObjectiveSense
from .simplex import DEFAULT_LP_TOL, LpRelaxation, LpStatus

GAP_FLOOR = 1e-10


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"
    UNBOUNDED = "unbounded"


class TraceSource(str, Enum):
    MILP = "milp"
    ADJOINT = "adjoint"


class BnbConfig(BaseModel):
    """Branch-and-bound settings"""
    time_limit: float = Field(default=150.0, gt=0)
    gap_tol: float = Field(default=1e-6, gt=0)
    abs_gap_tol: float = Field(default=1e-9, gt=0)
    integrality_tol: float = Field(default=1e-6, gt=0)
    lp_tol: float = Field(default=DEFAULT_LP_TOL, gt=0)
    # only recorded in run manifests; the tree search draws no random numbers
    seed: int = Field(default=0, ge=0)
    node_limit: Optional[int] = Field(default=None, ge=1)
    node_selection: Literal["best_bound"] = "best_bound"
    branch_rule: Literal["most_fractional"] = "most_fractional"


class SolveReport(BaseModel):
    """Outcome of a branch-and-bound run, in the model's objective sense"""
    status: SolveStatus
    sense: ObjectiveSense = ObjectiveSense.MINIMIZE
    incumbent: Optional[List[float]] = None
    incumbent_obj: Optional[float] = None
    relaxed_bound: float
    gap: float
    nodes_explored: int = 0
    wall_time: float = 0.0
    injected_incumbents: int = 0

    @property
    def has_incumbent(self) -> bool:
        return self.incumbent is not None

    @property
    def x(self) -> Optional[np.ndarray]:
        return None if self.incumbent is None else np.asarray(self.incumbent, dtype=float)


class InjectionResult(BaseModel):
    """Answer to an incumbent injection"""
    accepted: bool
    reason: str
    objective: Optional[float] = None
    max_violation: float = 0.0
    gap: Optional[float] = None

    def __bool__(self) -> bool:
        return self.accepted


@dataclass
class ProgressEvent:
    """Emitted whenever the incumbent improves or the relaxed bound rises"""
    time_s: float
    incumbent_obj: Optional[float]
    relaxed_bound: float
    gap: float
    source: TraceSource


def compute_gap(incumbent_obj: Optional[float], relaxed_bound: float) -> float:
    """``|incumbent - bound| / max(1e-10, |incumbent|)``, infinite without an incumbent"""
    if incumbent_obj is None or not math.isfinite(relaxed_bound) or not math.isfinite(incumbent_obj):
        return math.inf
    return abs(incumbent_obj - relaxed_bound) / max(GAP_FLOOR, abs(incumbent_obj))


@dataclass
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    x: np.ndarray
    bound: float
    depth: int


class BranchAndBound:
    """
    Branch-and-bound solver for one MilpModel

    Args:
        model: Model to solve; must not change while a solve runs
        config: Solver settings
        on_progress: Optional callback receiving ProgressEvent objects
    """

    def __init__(
        self,
        model: MilpModel,
        config: Optional[BnbConfig] = None,
        on_progress: Optional[Callable[[ProgressEvent], None]] = None,
    ):
        self.model = model
        self.config = config or BnbConfig()
        self.relaxation = LpRelaxation(model, self.config.lp_tol)
        self.on_progress = on_progress
        self._sign = 1.0 if model.sense is ObjectiveSense.MINIMIZE else -1.0
        self._integer = np.array(model.integer_indices, dtype=int)
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._start = time.perf_counter()
        self._incumbent: Optional[np.ndarray] = None
        self._incumbent_val = math.inf      # internal (minimization) value
        self._bound_val = -math.inf         # internal, only ever raised
        self._closed_bound = math.inf
        self._heap: list = []
        self._injected = 0
        self.nodes_explored = 0

    # -- incumbent handling ---------------------------------------------

    def _external(self, value: float) -> float:
        return self._sign * value

    def _prunable(self, value: float) -> bool:
        """A node whose bound cannot beat the incumbent by more than the tolerances"""
        if self._incumbent is None:
            return False
        tol = max(self.config.abs_gap_tol, self.config.gap_tol * abs(self._incumbent_val))
        return value >= self._incumbent_val - tol

    def _current_bound(self) -> float:
        candidates = [self._closed_bound, self._incumbent_val]
        if self._heap:
            candidates.append(self._heap[0][0])
        return min(candidates)

    def _refresh_bound(self, source: TraceSource = TraceSource.MILP) -> None:
        bound = self._current_bound()
        if bound > self._bound_val:
            self._bound_val = min(bound, self._incumbent_val)
            self._emit(source)

    def _gap(self) -> float:
        if self._incumbent is None:
            return math.inf
        return compute_gap(self._external(self._incumbent_val), self._external(self._bound_val))

    def _emit(self, source: TraceSource) -> None:
        if self.on_progress is None:
            return
        incumbent = None if self._incumbent is None else self._external(self._incumbent_val)
        event = ProgressEvent(
            time_s=time.perf_counter() - self._start,
            incumbent_obj=incumbent,
            relaxed_bound=self._external(self._bound_val),
            gap=self._gap(),
            source=source,
        )
        try:
            self.on_progress(event)
        except Exception as e:
            logger.error(f"Progress callback failed: {e}")

    def _offer(self, x: np.ndarray, value: float, source: TraceSource) -> bool:
        with self._lock:
            if value >= self._incumbent_val:
                return False
            self._incumbent = np.array(x, dtype=float)
            self._incumbent_val = value
            self._emit(source)
            return True

    def check_candidate(self, candidate: Sequence[float]) -> InjectionResult:
        """Feasibility and integrality check shared by hints and injections"""
        x = np.asarray(candidate, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.model.num_vars:
            raise DimensionError(f"candidate has shape {x.shape}, model has {self.model.num_vars} variables")
        violation, where = self.model.max_violation(x)
        if violation > self.config.lp_tol:
            return InjectionResult(
                accepted=False,
                reason=f"infeasible: violates {where} by {violation:.3e}",
                max_violation=violation,
            )
        fractionality = self.model.max_fractionality(x)
        if fractionality > self.config.integrality_tol:
            return InjectionResult(
                accepted=False,
                reason=f"not integral: fractionality {fractionality:.3e}",
                max_violation=violation,
            )
        return InjectionResult(
            accepted=True,
            reason="feasible",
            objective=self.model.objective_value(x),
            max_violation=violation,
        )

    def inject_incumbent(self, candidate: Sequence[float], source: TraceSource = TraceSource.ADJOINT) -> InjectionResult:
        """
        Offer an externally found solution; safe to call from another thread

        Args:
            candidate: Full assignment over all model variables
            source: Who produced the candidate (recorded in progress events)

        Returns:
            InjectionResult; ``accepted`` is True only for feasible improving points
        """
        check = self.check_candidate(candidate)
        if not check.accepted:
            logger.debug(f"Rejected injected incumbent: {check.reason}")
            return check
        value = self._sign * check.objective
        with self._lock:
            if not self._offer(np.asarray(candidate, dtype=float), value, source):
                return InjectionResult(
                    accepted=False,
                    reason=f"non-improving: {check.objective:.6g} vs incumbent {self._external(self._incumbent_val):.6g}",
                    objective=check.objective,
                    max_violation=check.max_violation,
                    gap=self._gap(),
                )
            self._injected += 1
            gap = self._gap()
        logger.debug(f"Accepted injected incumbent {check.objective:.6g} (gap {gap:.3e})")
        return InjectionResult(
            accepted=True,
            reason="improving",
            objective=check.objective,
            max_violation=check.max_violation,
            gap=gap,
        )

    def stop(self) -> None:
        """Ask a running solve to return at its next node"""
        self._stop.set()

    # -- tree search ----------------------------------------------------

    def _branch_index(self, x: np.ndarray) -> int:
        """Most fractional integer variable, lowest index on ties; -1 when integral"""
        if self._integer.size == 0:
            return -1
        values = x[self._integer]
        frac = values - np.floor(values)
        score = np.minimum(frac, 1.0 - frac)
        best = int(np.argmax(score))
        if score[best] <= self.config.integrality_tol:
            return -1
        return int(self._integer[best])

    def _evaluate(self, lower: np.ndarray, upper: np.ndarray, depth: int, parent_bound: float, seq: int) -> None:
        result = self.relaxation.solve(lower, upper)
        self.nodes_explored += 1
        if result.status is not LpStatus.OPTIMAL:
            return
        value = max(self._sign * result.objective, parent_bound)
        with self._lock:
            if self._branch_index(result.x) < 0:
                self._offer(result.x, self._sign * result.objective, TraceSource.MILP)
                return
            if self._prunable(value):
                self._close(value)
                return
            heapq.heappush(self._heap, (value, seq, _Node(lower, upper, result.x, value, depth)))

    def _close(self, value: float) -> None:
        if value < self._incumbent_val - self.config.abs_gap_tol:
            self._closed_bound = min(self._closed_bound, value)

    def _report(self, status: SolveStatus) -> SolveReport:
        with self._lock:
            incumbent = None if self._incumbent is None else self._incumbent.tolist()
            incumbent_obj = None if self._incumbent is None else self._external(self._incumbent_val)
            return SolveReport(
                status=status,
                sense=self.model.sense,
                incumbent=incumbent,
                incumbent_obj=incumbent_obj,
                relaxed_bound=self._external(self._bound_val),
                gap=self._gap(),
                nodes_explored=self.nodes_explored,
                wall_time=time.perf_counter() - self._start,
                injected_incumbents=self._injected,
            )

    def solve(self, incumbent_hint: Optional[Sequence[float]] = None) -> SolveReport:
        """
        Run the tree search

        Args:
            incumbent_hint: Optional feasible starting solution

        Returns:
            SolveReport in the model's objective sense

        Raises:
            InvalidIncumbentError: hint infeasible or fractional
        """
        # the clock starts at construction so injections made before solve() share the timeline
        deadline = self._start + self.config.time_limit
        logger.debug(f"Branch-and-bound on {self.model!r}")

        if incumbent_hint is not None:
            check = self.check_candidate(incumbent_hint)
            if not check.accepted:
                raise InvalidIncumbentError(f"incumbent hint rejected: {check.reason}")
            self._offer(np.asarray(incumbent_hint, dtype=float), self._sign * check.objective, TraceSource.MILP)

        root = self.relaxation.solve()
        self.nodes_explored += 1
        if root.status is LpStatus.INFEASIBLE:
            with self._lock:
                self._bound_val = math.inf
            return self._report(SolveStatus.INFEASIBLE)
        if root.status is LpStatus.UNBOUNDED:
            with self._lock:
                self._bound_val = -math.inf
            return self._report(SolveStatus.UNBOUNDED)

        lower, upper = self.relaxation.lower.copy(), self.relaxation.upper.copy()
        root_value = self._sign * root.objective
        with self._lock:
            if self._branch_index(root.x) < 0:
                self._offer(root.x, root_value, TraceSource.MILP)
            elif self._prunable(root_value):
                self._close(root_value)
            else:
                heapq.heappush(self._heap, (root_value, 0, _Node(lower, upper, root.x, root_value, 0)))
            self._refresh_bound()
        seq = 1

        status = None
        while status is None:
            with self._lock:
                self._refresh_bound()
                if not self._heap:
                    break
                if self._incumbent is not None and self._gap() <= self.config.gap_tol:
                    status = SolveStatus.OPTIMAL
                    break
                bound, _, node = heapq.heappop(self._heap)
                if self._prunable(bound):
                    self._close(bound)
                    continue

            if time.perf_counter() >= deadline:
                with self._lock:
                    heapq.heappush(self._heap, (bound, seq, node))
                status = SolveStatus.TIME_LIMIT
                break
            if self._stop.is_set() or (
                self.config.node_limit is not None and self.nodes_explored >= self.config.node_limit
            ):
                with self._lock:
                    heapq.heappush(self._heap, (bound, seq, node))
                    status = SolveStatus.FEASIBLE if self._incumbent is not None else SolveStatus.TIME_LIMIT
                break

            j = self._branch_index(node.x)
            value = node.x[j]
            down_upper = node.upper.copy()
            down_upper[j] = math.floor(value)
            up_lower = node.lower.copy()
            up_lower[j] = math.ceil(value)
            self._evaluate(node.lower, down_upper, node.depth + 1, node.bound, seq)
            self._evaluate(up_lower, node.upper, node.depth + 1, node.bound, seq + 1)
            seq += 2

        with self._lock:
            if status is None or status is SolveStatus.OPTIMAL:
                if not self._heap:
                    # tree exhausted: the bound is the incumbent (or closed nodes)
                    final = min(self._closed_bound, self._incumbent_val)
                    self._bound_val = max(self._bound_val, final) if self._incumbent is not None else math.inf
                    self._emit(TraceSource.MILP)
                status = SolveStatus.OPTIMAL if self._incumbent is not None else SolveStatus.INFEASIBLE
            else:
                self._refresh_bound()
                # an injection that lands after the last gap check can still close the gap
                if self._incumbent is not None and self._gap() <= self.config.gap_tol:
                    status = SolveStatus.OPTIMAL

        report = self._report(status)
        logger.debug(
            f"Branch-and-bound finished: {report.status.value}, obj={report.incumbent_obj}, "
            f"bound={report.relaxed_bound:.6g}, gap={report.gap:.3e}, nodes={report.nodes_explored}"
        )
        return report


def solve_milp(
    model: MilpModel,
    config: Optional[BnbConfig] = None,
    incumbent_hint: Optional[Sequence[float]] = None,
    on_progress: Optional[Callable[[ProgressEvent], None]] = None,
) -> SolveReport:
    """Solve ``model`` to ``config.gap_tol`` or until a limit is hit"""
    return BranchAndBound(model, config, on_progress).solve(incumbent_hint)
