"""On-disk cache of bounds tables keyed by a digest of (network, design domain, method)"""

import json
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from loguru import logger

from ..encoding.problem import LinearConstraintSpec
from ..errors import BoundsError
from ..network.model import Network
from ..utils import sha256_digest
from .table import BoundsTable, load_bounds


def bounds_digest(
    net: Network,
    design_lower,
    design_upper,
    extra_constraints: Sequence[LinearConstraintSpec] = (),
    method: str = "milp",
) -> str:
    """Digest identifying the inputs a bounds table depends on"""
    constraints = json.dumps([c.model_dump(mode="json") for c in extra_constraints], sort_keys=True)
    return sha256_digest(
        net.fingerprint(),
        np.ascontiguousarray(design_lower, dtype="<f8").tobytes(),
        np.ascontiguousarray(design_upper, dtype="<f8").tobytes(),
        constraints.encode(),
        method.encode(),
    )


class BoundsCache:
    """Directory of bounds files named after their digest"""

    def __init__(self, cache_dir: Union[str, Path]):
        self.cache_dir = Path(cache_dir)

    def path_for(self, digest: str) -> Path:
        return self.cache_dir / f"bounds_{digest[:16]}.json"

    def get(self, digest: str) -> Optional[BoundsTable]:
        """Cached table for ``digest``, or None when absent, unreadable or stale"""
        path = self.path_for(digest)
        if not path.exists():
            return None
        try:
            table = load_bounds(path)
        except BoundsError as e:
            logger.warning(f"Ignoring unreadable bounds cache entry {path}: {e}")
            return None
        if table.digest != digest:
            logger.warning(f"Bounds cache digest mismatch in {path}, recomputing")
            return None
        logger.info(f"Reusing cached bounds {path}")
        return table

    def put(self, table: BoundsTable) -> Path:
        if not table.digest:
            raise BoundsError("cannot cache a bounds table without a digest")
        return table.save(self.path_for(table.digest))
