"""Local JSON run-history store"""

import json
import os
from pathlib import Path
from typing import List, Optional, Union

from loguru import logger
from pydantic import ValidationError

from .models import RunRecord


class RunStore:
    """History of command runs in a local JSON file, capped at the newest ``max_runs``"""

    def __init__(self, store_file: Union[str, Path] = "logs/run_history.json", max_runs: Optional[int] = None):
        self.store_file = Path(store_file)
        self.max_runs = max_runs
        self._load_local_store()

    def _load_local_store(self):
        """Load local JSON store"""
        self.local_data = {"runs": []}
        try:
            if self.store_file.exists() and os.path.getsize(self.store_file) > 0:
                with open(self.store_file, "r", encoding="utf-8") as f:
                    data = json.load(f)
                if isinstance(data, dict) and isinstance(data.get("runs"), list):
                    self.local_data = data
                else:
                    logger.warning(f"Run history {self.store_file} has an unexpected layout, starting fresh")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading run history: {e}")

    def _save_local_store(self):
        """Save local JSON store"""
        try:
            self.store_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.store_file, "w", encoding="utf-8") as f:
                json.dump(self.local_data, f, indent=2, default=str)
        except OSError as e:
            logger.error(f"Error saving run history: {e}")

    def record_run(self, record: RunRecord) -> bool:
        """Append a run and persist the store"""
        runs = self.local_data["runs"]
        runs.append(record.model_dump(mode="json"))
        if self.max_runs is not None and len(runs) > self.max_runs:
            dropped = len(runs) - self.max_runs
            del runs[:dropped]
            logger.debug(f"Dropped {dropped} oldest run(s) from {self.store_file}")
        self._save_local_store()
        logger.debug(f"Recorded run {record.run_id} ({record.command}) in {self.store_file}")
        return True

    def recent_runs(self, limit: int = 10, command: Optional[str] = None) -> List[RunRecord]:
        """Latest ``limit`` runs, newest first"""
        records = []
        for raw in reversed(self.local_data["runs"]):
            try:
                record = RunRecord.model_validate(raw)
            except ValidationError:
                logger.warning(f"Skipping malformed run entry: {str(raw)[:80]}")
                continue
            if command is None or record.command == command:
                records.append(record)
            if len(records) >= limit:
                break
        return records

    def __len__(self) -> int:
        return len(self.local_data["runs"])
