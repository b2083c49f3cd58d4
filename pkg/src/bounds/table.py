"""Per-node preactivation bounds, ReLU stability classes and the bounds file format"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import BoundsError, EncodingError
from ..network.model import Activation, Network

BOUNDS_FORMAT_VERSION = 1


class Stability(str, Enum):
    STABLY_ACTIVE = "stably_active"
    STABLY_INACTIVE = "stably_inactive"
    UNSTABLE = "unstable"


class Provenance(str, Enum):
    INTERVAL = "interval"
    MILP_EXACT = "milp_exact"
    MILP_RELAXED = "milp_relaxed"


def classify(lower: float, upper: float) -> Stability:
    """Stability of a ReLU whose preactivation lies in ``[lower, upper]``.

    A node with ``upper <= 0`` is inactive even when ``lower == upper == 0``.
    """
    if upper <= 0.0:
        return Stability.STABLY_INACTIVE
    if lower >= 0.0:
        return Stability.STABLY_ACTIVE
    return Stability.UNSTABLE


@dataclass(frozen=True)
class NodeBounds:
    layer: int
    index: int
    lower: float
    upper: float
    stability: Stability
    provenance: Provenance
    time: float = 0.0


@dataclass
class BoundsTable:
    """Preactivation bounds for every node of every layer (output layer included).

    Stability is only meaningful on ReLU layers; the output layer's bounds
    feed the robustness big-Ms.
    """
    lower: List[np.ndarray]
    upper: List[np.ndarray]
    provenance: List[List[Provenance]]
    compute_time: List[np.ndarray]
    relu_layers: List[bool]
    design_lower: np.ndarray
    design_upper: np.ndarray
    digest: str = ""
    meta: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_intervals(
        cls,
        net: Network,
        lower: Sequence[np.ndarray],
        upper: Sequence[np.ndarray],
        design_lower: np.ndarray,
        design_upper: np.ndarray,
    ) -> "BoundsTable":
        return cls(
            lower=[np.array(lo, dtype=float) for lo in lower],
            upper=[np.array(hi, dtype=float) for hi in upper],
            provenance=[[Provenance.INTERVAL] * len(lo) for lo in lower],
            compute_time=[np.zeros(len(lo)) for lo in lower],
            relu_layers=[layer.activation is Activation.RELU for layer in net.layers],
            design_lower=np.array(design_lower, dtype=float),
            design_upper=np.array(design_upper, dtype=float),
        )

    @property
    def depth(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> List[int]:
        return [len(lo) for lo in self.lower]

    def stability(self, layer: int, node: int) -> Optional[Stability]:
        """Stability of one node, ``None`` on the linear output layer"""
        if not self.relu_layers[layer]:
            return None
        return classify(self.lower[layer][node], self.upper[layer][node])

    def layer_stability(self, layer: int) -> List[Optional[Stability]]:
        return [self.stability(layer, k) for k in range(self.widths[layer])]

    def nodes(self) -> Iterator[NodeBounds]:
        for l in range(self.depth):
            for k in range(self.widths[l]):
                yield NodeBounds(
                    layer=l,
                    index=k,
                    lower=float(self.lower[l][k]),
                    upper=float(self.upper[l][k]),
                    stability=self.stability(l, k) or classify(self.lower[l][k], self.upper[l][k]),
                    provenance=self.provenance[l][k],
                    time=float(self.compute_time[l][k]),
                )

    def census(self) -> Dict[str, object]:
        """Counts of stably active, stably inactive and unstable ReLUs, overall and per layer"""
        totals = {s.value: 0 for s in Stability}
        per_layer = []
        for l in range(self.depth):
            if not self.relu_layers[l]:
                continue
            counts = {s.value: 0 for s in Stability}
            for stability in self.layer_stability(l):
                counts[stability.value] += 1
                totals[stability.value] += 1
            per_layer.append({"layer": l, **counts})
        return {**totals, "per_layer": per_layer}

    @property
    def unstable_count(self) -> int:
        return int(self.census()[Stability.UNSTABLE.value])

    def copy(self) -> "BoundsTable":
        return BoundsTable(
            lower=[lo.copy() for lo in self.lower],
            upper=[hi.copy() for hi in self.upper],
            provenance=[list(p) for p in self.provenance],
            compute_time=[t.copy() for t in self.compute_time],
            relu_layers=list(self.relu_layers),
            design_lower=self.design_lower.copy(),
            design_upper=self.design_upper.copy(),
            digest=self.digest,
            meta=dict(self.meta),
        )

    def validate_for(self, net: Network) -> None:
        """
        Check that this table covers ``net`` node for node

        Raises:
            EncodingError: missing layers/nodes, non-finite or crossed bounds
        """
        if self.widths != net.widths:
            raise EncodingError(f"bounds cover layer widths {self.widths}, network has {net.widths}")
        for l in range(self.depth):
            lo, hi = self.lower[l], self.upper[l]
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise EncodingError(f"bounds missing (non-finite) in layer {l}")
            crossed = np.flatnonzero(lo > hi)
            if crossed.size:
                k = int(crossed[0])
                raise EncodingError(f"layer {l} node {k}: lower bound {lo[k]} exceeds upper bound {hi[k]}")

    # -- file format ----------------------------------------------------

    def to_document(self) -> dict:
        return {
            "format_version": BOUNDS_FORMAT_VERSION,
            "digest": self.digest,
            "design_lower": self.design_lower.tolist(),
            "design_upper": self.design_upper.tolist(),
            "relu_layers": list(self.relu_layers),
            "meta": self.meta,
            "nodes": [
                {
                    "layer": node.layer,
                    "index": node.index,
                    "lower": node.lower,
                    "upper": node.upper,
                    "stability": node.stability.value,
                    "provenance": node.provenance.value,
                    "time": node.time,
                }
                for node in self.nodes()
            ],
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_document(), f, indent=2)
        logger.debug(f"Saved bounds table ({sum(self.widths)} nodes) to {path}")
        return path


class NodeRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    layer: int = Field(ge=0)
    index: int = Field(ge=0)
    lower: float
    upper: float
    stability: Stability
    provenance: Provenance
    time: float = 0.0


class BoundsFile(BaseModel):
    """Bounds cache document"""
    model_config = ConfigDict(extra="forbid")

    format_version: int = BOUNDS_FORMAT_VERSION
    digest: str = ""
    design_lower: List[float]
    design_upper: List[float]
    relu_layers: List[bool]
    meta: Dict[str, object] = Field(default_factory=dict)
    nodes: List[NodeRecord]


def table_from_document(document: dict) -> BoundsTable:
    try:
        spec = BoundsFile.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"])
        raise BoundsError(f"invalid bounds file at {loc}: {first['msg']}") from e
    if spec.format_version != BOUNDS_FORMAT_VERSION:
        raise BoundsError(f"unsupported bounds format_version {spec.format_version}")

    depth = len(spec.relu_layers)
    widths = [0] * depth
    for node in spec.nodes:
        if node.layer >= depth:
            raise BoundsError(f"node record references layer {node.layer} of a {depth}-layer table")
        widths[node.layer] = max(widths[node.layer], node.index + 1)

    lower = [np.full(w, np.nan) for w in widths]
    upper = [np.full(w, np.nan) for w in widths]
    provenance = [[Provenance.INTERVAL] * w for w in widths]
    times = [np.zeros(w) for w in widths]
    for node in spec.nodes:
        lower[node.layer][node.index] = node.lower
        upper[node.layer][node.index] = node.upper
        provenance[node.layer][node.index] = node.provenance
        times[node.layer][node.index] = node.time
    for l in range(depth):
        if np.isnan(lower[l]).any():
            raise BoundsError(f"bounds file has no record for some node of layer {l}")

    return BoundsTable(
        lower=lower,
        upper=upper,
        provenance=provenance,
        compute_time=times,
        relu_layers=list(spec.relu_layers),
        design_lower=np.array(spec.design_lower, dtype=float),
        design_upper=np.array(spec.design_upper, dtype=float),
        digest=spec.digest,
        meta=dict(spec.meta),
    )


def load_bounds(path: Union[str, Path]) -> BoundsTable:
    """
    Load a bounds file written by ``BoundsTable.save``

    Raises:
        BoundsError: unreadable file or schema violation
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise BoundsError(f"cannot read bounds file {path}: {e}") from e
    return table_from_document(document)
