"""Per-run state shared by the command implementations"""

import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from loguru import logger
from pydantic import BaseModel

from ..analytics.metrics import RunMetrics
from ..analytics.reporter import RunManifest, manifest_path, report_summary, write_manifest
from ..config import AppConfig
from ..memory.models import RunRecord
from ..memory.store import RunStore
from ..milp.branch_and_bound import SolveReport
from ..utils import file_digest


@dataclass
class RunContext:
    """Config, metrics and provenance of one command run"""
    config: AppConfig
    command: str
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    metrics: RunMetrics = field(default_factory=RunMetrics)
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    report: Optional[SolveReport] = None
    seed: Optional[int] = None
    primary_output: Optional[Path] = None
    started: float = field(default_factory=time.perf_counter)

    def track_input(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.exists():
            self.inputs[str(path)] = file_digest(path)
        return path

    def track_output(self, path: Union[str, Path], primary: bool = False) -> Path:
        path = Path(path)
        self.outputs.append(str(path))
        if primary and self.primary_output is None:
            self.primary_output = path
        return path

    def use_section(self, name: str, section: BaseModel) -> BaseModel:
        """Swap in a config section with CLI overrides applied, so the manifest records what actually ran"""
        self.config = self.config.model_copy(update={name: section})
        return section

    def record_report(self, report: SolveReport) -> None:
        self.metrics.record_solve(report)
        self.report = report

    def finish(self, exit_code: int) -> Path:
        """Write the run manifest and append the run to the history"""
        wall_time = time.perf_counter() - self.started
        manifest = RunManifest(
            run_id=self.run_id,
            command=self.command,
            inputs=self.inputs,
            config=self.config.snapshot(),
            seed=self.seed,
            wall_time=wall_time,
            exit_code=exit_code,
            report=None if self.report is None else report_summary(self.report),
            outputs=self.outputs,
            metrics=self.metrics.get_summary(),
        )
        path = write_manifest(
            manifest, manifest_path(self.primary_output, self.config.output.manifests_dir, self.command, self.run_id)
        )
        RunStore(self.config.output.history_path, self.config.output.history_limit).record_run(
            RunRecord(
                run_id=self.run_id,
                command=self.command,
                exit_code=exit_code,
                status=None if self.report is None else self.report.status.value,
                objective=None if self.report is None else self.report.incumbent_obj,
                gap=None if self.report is None or self.report.gap == float("inf") else self.report.gap,
                wall_time=wall_time,
                manifest_path=str(path),
                inputs=self.inputs,
                summary={"outputs": self.outputs, "errors": self.metrics.metrics["errors"]},
            )
        )
        logger.debug(f"Run {self.run_id} finished with exit code {exit_code} in {wall_time:.2f}s")
        return path
