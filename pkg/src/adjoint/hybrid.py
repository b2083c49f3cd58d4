"""Hybrid inversion: branch-and-bound and gradient search side by side.

Both workers run in threads driven from asyncio. The only channel between
them is incumbent injection: each finished gradient restart is lifted to a
full MILP assignment and offered to the tree search, which keeps or rejects
it. The gap certificate therefore stays valid whichever side produced the
final incumbent.
"""

import asyncio
import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger

from ..bounds.table import BoundsTable
from ..encoding.encoder import EncodedProblem, encode_problem, lift_assignment
from ..encoding.problem import InverseProblem
from ..errors import ProblemError
from ..milp.branch_and_bound import BnbConfig, BranchAndBound, ProgressEvent, SolveReport, TraceSource
from ..network.model import Network
from .gradient_search import AdjointConfig, AdjointResult, adjoint_invert

TRACE_COLUMNS = ["time_s", "incumbent", "relaxed_bound", "gap", "source"]


class GapTrace:
    """Append-only, time-ordered log of incumbent/bound/gap changes"""

    def __init__(self):
        self._events: List[ProgressEvent] = []
        self._lock = threading.Lock()

    def record(self, event: ProgressEvent) -> None:
        with self._lock:
            self._events.append(event)

    @property
    def events(self) -> List[ProgressEvent]:
        with self._lock:
            return sorted(self._events, key=lambda e: e.time_s)

    def __len__(self) -> int:
        return len(self._events)

    def first_time_below(self, gap: float) -> Optional[float]:
        """Earliest time the gap reached ``gap`` or less, None if it never did"""
        for event in self.events:
            if event.gap <= gap:
                return event.time_s
        return None

    def rows(self) -> List[dict]:
        return [
            {
                "time_s": f"{e.time_s:.6f}",
                "incumbent": "" if e.incumbent_obj is None else repr(e.incumbent_obj),
                "relaxed_bound": repr(e.relaxed_bound),
                "gap": "inf" if math.isinf(e.gap) else repr(e.gap),
                "source": e.source.value,
            }
            for e in self.events
        ]

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS)
            writer.writeheader()
            writer.writerows(self.rows())
        logger.info(f"Gap trace ({len(self)} events) saved to {path}")
        return path


@dataclass
class HybridResult:
    report: SolveReport
    trace: GapTrace
    encoded: EncodedProblem
    adjoint: Optional[AdjointResult] = None
    injections: List[dict] = field(default_factory=list)


async def hybrid_solve(
    net: Network,
    bounds: BoundsTable,
    problem: InverseProblem,
    adjoint_config: Optional[AdjointConfig] = None,
    bnb_config: Optional[BnbConfig] = None,
) -> HybridResult:
    """
    Run branch-and-bound and gradient inversion concurrently on one problem

    Args:
        net: Network to invert
        bounds: Bounds valid over the problem's design box
        problem: Continuous problem without selection budget or extra constraints
        adjoint_config: Gradient-search settings
        bnb_config: Tree-search settings; the run ends at ``gap_tol`` or ``time_limit``

    Returns:
        HybridResult with the final report and the merged gap trace

    Raises:
        ProblemError: problem outside the gradient method's scope
    """
    adjoint_config = adjoint_config or AdjointConfig()
    bnb_config = bnb_config or BnbConfig()
    if problem.selection_budget is not None or problem.is_integer or problem.extra_constraints:
        raise ProblemError("hybrid mode needs a continuous, box-constrained problem without selection")

    encoded = encode_problem(net, bounds, problem)
    trace = GapTrace()
    solver = BranchAndBound(encoded.model, bnb_config, on_progress=trace.record)
    stop = threading.Event()
    injections: List[dict] = []

    def inject(designs: List[np.ndarray], objective: float) -> None:
        candidate = lift_assignment(encoded, designs)
        result = solver.inject_incumbent(candidate, TraceSource.ADJOINT)
        injections.append({"objective": objective, "accepted": result.accepted, "reason": result.reason})
        if result.accepted and result.gap is not None and result.gap <= bnb_config.gap_tol:
            stop.set()

    logger.info(f"Hybrid solve started on {encoded.model!r}")
    milp_task = asyncio.create_task(asyncio.to_thread(solver.solve))
    adjoint_task = asyncio.create_task(
        asyncio.to_thread(adjoint_invert, net, problem, adjoint_config, stop, inject)
    )
    report = await milp_task
    stop.set()
    adjoint_result = await adjoint_task

    accepted = sum(1 for i in injections if i["accepted"])
    logger.info(
        f"Hybrid solve finished: {report.status.value}, objective {report.incumbent_obj}, gap {report.gap:.3e}, "
        f"{accepted}/{len(injections)} adjoint incumbents accepted"
    )
    return HybridResult(report, trace, encoded, adjoint_result, injections)
