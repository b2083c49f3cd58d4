"""Solution documents, run manifests, CSV output and console tables"""

import csv
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from .. import __version__
from ..bounds.table import BoundsTable
from ..encoding.encoder import EncodedProblem, EncodingMode, decode, resimulation_error
from ..memory.store import RunStore
from ..milp.branch_and_bound import SolveReport
from ..network.model import evaluate

SOLUTION_FORMAT_VERSION = 1
MANIFEST_FORMAT_VERSION = 1
OBJECTIVE_AGREEMENT_TOL = 1e-6


def _floats(values) -> List[float]:
    return [float(v) for v in np.asarray(values, dtype=float)]


def solution_document(encoded: EncodedProblem, report: SolveReport, extra: Optional[Dict[str, Any]] = None) -> dict:
    """
    Solver outcome plus its re-simulation through the network

    Each design is pushed through a forward pass and the objective is
    recomputed from that output, next to the solver's own objective. Wall
    time is left out so reruns give byte-identical files.
    """
    document: Dict[str, Any] = {
        "format_version": SOLUTION_FORMAT_VERSION,
        "mode": encoded.mode.value,
        "status": report.status.value,
        "objective": report.incumbent_obj,
        "relaxed_bound": report.relaxed_bound if np.isfinite(report.relaxed_bound) else None,
        "gap": report.gap if np.isfinite(report.gap) else None,
        "nodes_explored": report.nodes_explored,
        "injected_incumbents": report.injected_incumbents,
        "model": {"variables": encoded.model.num_vars, "constraints": len(encoded.model.constraints)},
        "copies": [],
        "resimulated_objective": None,
        "objective_agreement": None,
        "resimulation_error": None,
        "selected": None,
    }
    if report.has_incumbent:
        decoded = decode(encoded, report.x)
        resimulated = 0.0
        for design, target in zip(decoded.designs, encoded.targets):
            output = evaluate(encoded.network, design)
            deviation = float(np.abs(output - target).sum())
            resimulated += deviation
            entry = {
                "target": _floats(target),
                "design": _floats(design),
                "output": _floats(output),
                "deviation": deviation,
            }
            if encoded.problem.scale is not None:
                # solver units times the declared display scale
                entry["display_design"] = _floats(design * encoded.problem.scale_array)
            document["copies"].append(entry)
        agreement = abs(resimulated - report.incumbent_obj)
        document["resimulated_objective"] = resimulated
        document["objective_agreement"] = agreement
        document["resimulation_error"] = resimulation_error(encoded, report.x)
        if encoded.selection:
            document["selected"] = decoded.selected
        if agreement > OBJECTIVE_AGREEMENT_TOL * max(1.0, abs(resimulated)):
            logger.warning(f"Solver objective {report.incumbent_obj} and re-simulated objective {resimulated} differ by {agreement:.3e}")
    if encoded.mode is EncodingMode.ROBUSTNESS and encoded.problem.robustness is not None:
        spec = encoded.problem.robustness
        candidate = np.asarray(spec.candidate, dtype=float)
        document["robustness"] = {
            "candidate": _floats(candidate),
            "epsilon": spec.epsilon,
            "nominal_deviation": float(np.abs(evaluate(encoded.network, candidate) - encoded.targets[0]).sum()),
            "witness": document["copies"][0]["design"] if document["copies"] else None,
        }
    if extra:
        document.update(extra)
    return document


def write_json(document: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_csv(rows: Sequence[dict], columns: Sequence[str], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns))
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"CSV ({len(rows)} rows) saved to {path}")
    return path


class RunManifest(BaseModel):
    """Provenance of one command run"""
    format_version: int = MANIFEST_FORMAT_VERSION
    run_id: str
    command: str
    tool_version: str = __version__
    inputs: Dict[str, str] = Field(default_factory=dict)  # path -> sha256
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    wall_time: float = 0.0
    exit_code: int = 0
    report: Optional[Dict[str, Any]] = None
    outputs: List[str] = Field(default_factory=list)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    created_at: str = Field(default_factory=lambda: datetime.now().isoformat())


def report_summary(report: SolveReport) -> Dict[str, Any]:
    """SolveReport without the incumbent vector"""
    return report.model_dump(mode="json", exclude={"incumbent"})


def manifest_path(primary_output: Optional[Union[str, Path]], manifests_dir: Union[str, Path], command: str, run_id: str) -> Path:
    """``<out>.manifest.json`` beside the primary output, else a file in ``manifests_dir``"""
    if primary_output is not None:
        return Path(primary_output).with_suffix(".manifest.json")
    return Path(manifests_dir) / f"{command}_{run_id}.manifest.json"


def write_manifest(manifest: RunManifest, path: Union[str, Path]) -> Path:
    path = write_json(manifest.model_dump(mode="json"), path)
    logger.debug(f"Run manifest saved to {path}")
    return path


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]], max_width: int = 40) -> str:
    """Plain-text table with ``" | "`` separators"""
    cells = [[str(c) for c in row] for row in rows]
    widths = []
    for i, h in enumerate(headers):
        width = max([len(h)] + [len(row[i]) for row in cells])
        widths.append(min(width, max_width))

    def clip(text: str, width: int) -> str:
        return text if len(text) <= width else text[: width - 3] + "..."

    header_line = " | ".join(f"{h:<{w}}" for h, w in zip(headers, widths))
    lines = [header_line, "-" * len(header_line)]
    for row in cells:
        lines.append(" | ".join(f"{clip(c, w):<{w}}" for c, w in zip(row, widths)))
    return "\n".join(lines)


def format_census(table: BoundsTable) -> str:
    """Stability census of the ReLU layers as a table"""
    census = table.census()
    rows = [
        [entry["layer"], entry["stably_active"], entry["stably_inactive"], entry["unstable"]]
        for entry in census["per_layer"]
    ]
    rows.append(["total", census["stably_active"], census["stably_inactive"], census["unstable"]])
    return format_table(["Layer", "Stably active", "Stably inactive", "Unstable"], rows)


class Reporter:
    """Console views over the run history"""

    def __init__(self, store: RunStore):
        self.store = store

    def display_recent_runs(self, limit: int = 10, command: Optional[str] = None):
        """Display recent runs"""
        runs = self.store.recent_runs(limit, command)
        if not runs:
            print("No recent runs found.")
            return

        print(f"Displaying last {len(runs)} runs:\n")
        rows = []
        for i, run in enumerate(runs, 1):
            objective = "-" if run.objective is None else f"{run.objective:.6g}"
            gap = "-" if run.gap is None else f"{run.gap:.2e}"
            rows.append([i, run.recorded_at[:19], run.command, run.status or "-", objective, gap, f"{run.wall_time:.2f}s", run.exit_code])
        print(format_table(["#", "When", "Command", "Status", "Objective", "Gap", "Time", "Exit"], rows))
        print("\n")
