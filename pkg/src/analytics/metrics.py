"""Metrics tracking"""

from collections import defaultdict
from datetime import datetime
from typing import Any, Dict, List

from loguru import logger

from ..bounds.table import BoundsTable, Provenance
from ..milp.branch_and_bound import SolveReport


def _empty_metrics() -> Dict[str, Any]:
    return {
        'solves': 0,
        'nodes_explored': 0,
        'solve_time': 0.0,
        'by_status': defaultdict(int),
        'bounds_tables': 0,
        'nodes_tightened': 0,
        'nodes_exact': 0,
        'injections_offered': 0,
        'injections_accepted': 0,
        'errors': 0,
        'phases': defaultdict(float),  # wall seconds per phase
        'failures': []  # Detailed failure log with reasons
    }


class RunMetrics:
    """Counters and timings for one command run"""

    def __init__(self):
        self.metrics = _empty_metrics()
        logger.debug("Run metrics initialized")

    def record_solve(self, report: SolveReport):
        self.metrics['solves'] += 1
        self.metrics['nodes_explored'] += report.nodes_explored
        self.metrics['solve_time'] += report.wall_time
        self.metrics['by_status'][report.status.value] += 1

    def record_bounds(self, table: BoundsTable):
        """Record how many nodes a bounds table tightened by MILP"""
        self.metrics['bounds_tables'] += 1
        for node in table.nodes():
            if node.provenance is not Provenance.INTERVAL:
                self.metrics['nodes_tightened'] += 1
            if node.provenance is Provenance.MILP_EXACT:
                self.metrics['nodes_exact'] += 1

    def record_injections(self, injections: List[dict]):
        self.metrics['injections_offered'] += len(injections)
        self.metrics['injections_accepted'] += sum(1 for i in injections if i.get('accepted'))

    def record_phase(self, phase: str, seconds: float):
        self.metrics['phases'][phase] += seconds

    def record_failure(
        self,
        failure_type: str,
        component: str,
        reason: str,
        context: Dict[str, Any] = None
    ):
        """
        Record a detailed failure

        Args:
            failure_type: Exception class name (ProblemError, LpNumericalError, ...)
            component: Command or module that failed
            reason: Error message
            context: Additional context (exit code, arguments)
        """
        self.metrics['failures'].append({
            'timestamp': datetime.now().isoformat(),
            'type': failure_type,
            'component': component,
            'reason': reason,
            'context': context or {}
        })
        self.metrics['errors'] += 1

    def get_summary(self) -> Dict[str, Any]:
        """Get metrics summary"""
        offered = self.metrics['injections_offered']
        return {
            'solves': self.metrics['solves'],
            'nodes_explored': self.metrics['nodes_explored'],
            'solve_time': self.metrics['solve_time'],
            'by_status': dict(self.metrics['by_status']),
            'bounds_tables': self.metrics['bounds_tables'],
            'nodes_tightened': self.metrics['nodes_tightened'],
            'nodes_exact': self.metrics['nodes_exact'],
            'injections_offered': offered,
            'injections_accepted': self.metrics['injections_accepted'],
            'injection_acceptance_rate': (
                self.metrics['injections_accepted'] / offered if offered > 0 else 0
            ),
            'phases': dict(self.metrics['phases']),
            'total_errors': self.metrics['errors'],
            'failures': self.metrics['failures']
        }

    def reset(self):
        """Reset metrics"""
        self.metrics = _empty_metrics()
