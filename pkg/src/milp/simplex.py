"""Two-phase primal simplex on a dense tableau.

Variables with general bounds are mapped to nonnegative columns before the
tableau is built: ``x = lo + y`` (plus a row ``y <= hi - lo``), ``x = hi - y``
for variables bounded only above, ``x = y+ - y-`` for free variables, and
fixed variables are substituted out. Integrality is ignored here; the
branch-and-bound layer passes tightened bounds per node.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from ..errors import LpNumericalError
from .model import ConstraintSense, MilpModel, ObjectiveSense

DEFAULT_LP_TOL = 1e-7
_COST_TOL = 1e-9
_DEGENERATE_STREAK = 50


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True)
class PivotStrategy:
    name: str
    bland: bool
    pivot_tol: float


# tried in order; each retry is more conservative than the last
PIVOT_STRATEGIES: Tuple[PivotStrategy, ...] = (
    PivotStrategy("dantzig", bland=False, pivot_tol=1e-9),
    PivotStrategy("bland", bland=True, pivot_tol=1e-9),
    PivotStrategy("bland-strict", bland=True, pivot_tol=1e-7),
)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _iterate(T: np.ndarray, basis: np.ndarray, ncols: int, strategy: PivotStrategy) -> Tuple[LpStatus, int]:
    """Run primal simplex pivots on ``T`` until optimal or unbounded.

    The last row of ``T`` holds reduced costs and ``-z`` in its last column.
    """
    m = T.shape[0] - 1
    use_bland = strategy.bland
    degenerate = 0
    max_iter = 50 * (m + ncols) + 100
    for iteration in range(max_iter):
        costs = T[-1, :ncols]
        if use_bland:
            candidates = np.flatnonzero(costs < -_COST_TOL)
            if candidates.size == 0:
                return LpStatus.OPTIMAL, iteration
            col = int(candidates[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -_COST_TOL:
                return LpStatus.OPTIMAL, iteration

        column = T[:m, col]
        eligible = column > strategy.pivot_tol
        if not eligible.any():
            return LpStatus.UNBOUNDED, iteration
        rhs = np.maximum(T[:m, -1], 0.0)
        ratios = np.full(m, np.inf)
        ratios[eligible] = rhs[eligible] / column[eligible]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))
        row = int(ties[np.argmin(basis[ties])])

        degenerate = degenerate + 1 if best <= 1e-12 else 0
        if degenerate > _DEGENERATE_STREAK and not use_bland:
            logger.debug("Degenerate streak detected, switching to Bland's rule")
            use_bland = True

        _pivot(T, row, col)
        basis[row] = col
    raise LpNumericalError(f"simplex iteration limit reached ({max_iter}) with strategy {strategy.name}")


def _tableau_simplex(
    A: np.ndarray,
    senses: Sequence[ConstraintSense],
    b: np.ndarray,
    c: np.ndarray,
    strategy: PivotStrategy,
    feas_tol: float,
) -> Tuple[LpStatus, Optional[np.ndarray], int]:
    """Minimize ``c @ y`` subject to ``A y <senses> b``, ``y >= 0``"""
    m, ny = A.shape
    A = A.copy()
    b = b.copy()
    senses = list(senses)
    for i in np.flatnonzero(b < 0):
        A[i] *= -1.0
        b[i] *= -1.0
        if senses[i] is ConstraintSense.LE:
            senses[i] = ConstraintSense.GE
        elif senses[i] is ConstraintSense.GE:
            senses[i] = ConstraintSense.LE

    n_slack = sum(1 for s in senses if s is not ConstraintSense.EQ)
    art_rows = [i for i, s in enumerate(senses) if s is not ConstraintSense.LE]
    art_start = ny + n_slack
    ncols = art_start + len(art_rows)

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :ny] = A
    T[:m, -1] = b
    basis = np.full(m, -1, dtype=int)
    slack = ny
    for i, sense in enumerate(senses):
        if sense is ConstraintSense.LE:
            T[i, slack] = 1.0
            basis[i] = slack
            slack += 1
        elif sense is ConstraintSense.GE:
            T[i, slack] = -1.0
            slack += 1
    for k, i in enumerate(art_rows):
        T[i, art_start + k] = 1.0
        basis[i] = art_start + k

    iterations = 0
    rows = list(range(m))
    if art_rows:
        T[-1, art_start:ncols] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        _, used = _iterate(T, basis, ncols, strategy)
        iterations += used
        if -T[-1, -1] > feas_tol:
            return LpStatus.INFEASIBLE, None, iterations

        for i in range(m):
            if basis[i] < art_start:
                continue
            row = np.abs(T[i, :art_start])
            j = int(np.argmax(row)) if art_start else 0
            if art_start and row[j] > strategy.pivot_tol:
                _pivot(T, i, j)
                basis[i] = j
            else:
                rows.remove(i)
        T = T[rows + [m]][:, list(range(art_start)) + [ncols]]
        basis = basis[rows]

    cost = np.zeros(art_start)
    cost[:ny] = c
    T[-1] = 0.0
    T[-1, :art_start] = cost
    for i, bi in enumerate(basis):
        if cost[bi] != 0.0:
            T[-1] -= cost[bi] * T[i]

    status, used = _iterate(T, basis, art_start, strategy)
    iterations += used
    if status is LpStatus.UNBOUNDED:
        return status, None, iterations

    y = np.zeros(art_start)
    y[basis] = T[:-1, -1]
    return LpStatus.OPTIMAL, np.maximum(y[:ny], 0.0), iterations


class LpRelaxation:
    """Continuous relaxation of a MilpModel, reusable across bound changes.

    The dense constraint matrix is built once; ``solve`` takes per-call
    variable bounds, which is how branch-and-bound nodes and bound
    tightening subproblems are expressed.
    """

    def __init__(self, model: MilpModel, lp_tol: float = DEFAULT_LP_TOL):
        model.validate()
        self.model = model
        self.lp_tol = lp_tol
        self.A, self.senses, self.b = model.constraint_matrix()
        self.c = model.objective_vector()
        self.sign = 1.0 if model.sense is ObjectiveSense.MINIMIZE else -1.0
        self.lower = model.lower_bounds()
        self.upper = model.upper_bounds()

    def _standard_form(self, lo: np.ndarray, hi: np.ndarray):
        n = lo.shape[0]
        offset = np.zeros(n)
        entries: List[Tuple[int, int, float]] = []
        bound_rows: List[Tuple[int, float]] = []
        ny = 0
        for j in range(n):
            if np.isfinite(lo[j]) and np.isfinite(hi[j]) and hi[j] - lo[j] <= 0.0:
                offset[j] = lo[j]
            elif np.isfinite(lo[j]):
                offset[j] = lo[j]
                entries.append((j, ny, 1.0))
                if np.isfinite(hi[j]):
                    bound_rows.append((ny, hi[j] - lo[j]))
                ny += 1
            elif np.isfinite(hi[j]):
                offset[j] = hi[j]
                entries.append((j, ny, -1.0))
                ny += 1
            else:
                entries.append((j, ny, 1.0))
                entries.append((j, ny + 1, -1.0))
                ny += 2

        M = np.zeros((n, ny))
        for j, col, value in entries:
            M[j, col] = value

        A = self.A @ M
        b = self.b - self.A @ offset
        senses = list(self.senses)
        if bound_rows:
            extra = np.zeros((len(bound_rows), ny))
            for r, (col, ub) in enumerate(bound_rows):
                extra[r, col] = 1.0
            A = np.vstack([A, extra])
            b = np.concatenate([b, [ub for _, ub in bound_rows]])
            senses.extend([ConstraintSense.LE] * len(bound_rows))
        c = (self.sign * self.c) @ M
        return A, senses, b, c, M, offset

    def _residual(self, x: np.ndarray) -> float:
        if self.A.shape[0] == 0:
            return 0.0
        lhs = self.A @ x
        excess = np.zeros_like(lhs)
        for i, sense in enumerate(self.senses):
            if sense is ConstraintSense.LE:
                excess[i] = lhs[i] - self.b[i]
            elif sense is ConstraintSense.GE:
                excess[i] = self.b[i] - lhs[i]
            else:
                excess[i] = abs(lhs[i] - self.b[i])
        return float(np.max(excess / (1.0 + np.abs(self.b))))

    def _solve_with(self, strategy: PivotStrategy, lo: np.ndarray, hi: np.ndarray) -> LpResult:
        A, senses, b, c, M, offset = self._standard_form(lo, hi)
        feas_tol = self.lp_tol * max(1.0, float(np.abs(b).max()) if b.size else 1.0)
        status, y, iterations = _tableau_simplex(A, senses, b, c, strategy, feas_tol)
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, iterations=iterations)

        x = np.clip(offset + M @ y, lo, hi)
        residual = self._residual(x)
        if residual > self.lp_tol:
            raise LpNumericalError(f"basic solution violates constraints by {residual:.3e} ({strategy.name})")
        return LpResult(LpStatus.OPTIMAL, x, self.model.objective_value(x), iterations)

    def solve(self, lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None) -> LpResult:
        """
        Solve the relaxation under optional replacement bounds

        Args:
            lower: Per-variable lower bounds (defaults to the model's)
            upper: Per-variable upper bounds (defaults to the model's)

        Returns:
            LpResult with status, primal solution and objective in the model's sense

        Raises:
            LpNumericalError: every pivoting strategy failed verification
        """
        lo = self.lower if lower is None else np.asarray(lower, dtype=float)
        hi = self.upper if upper is None else np.asarray(upper, dtype=float)
        if np.any(lo > hi + self.lp_tol):
            return LpResult(LpStatus.INFEASIBLE)
        hi = np.maximum(hi, lo)

        for attempt in Retrying(
            stop=stop_after_attempt(len(PIVOT_STRATEGIES)),
            retry=retry_if_exception_type(LpNumericalError),
            before_sleep=lambda state: logger.warning(
                f"LP retry after numerical trouble: {state.outcome.exception()}"
            ),
            reraise=True,
        ):
            with attempt:
                strategy = PIVOT_STRATEGIES[attempt.retry_state.attempt_number - 1]
                return self._solve_with(strategy, lo, hi)


def solve_lp(
    model: MilpModel,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    lp_tol: float = DEFAULT_LP_TOL,
) -> LpResult:
    """Solve the continuous relaxation of ``model`` (integrality dropped)"""
    return LpRelaxation(model, lp_tol).solve(lower, upper)
