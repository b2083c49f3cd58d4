"""Data models for the run-history store"""

from datetime import datetime
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field


class RunRecord(BaseModel):
    """One command run as kept in the history"""
    run_id: str
    command: str
    exit_code: int
    status: Optional[str] = None
    objective: Optional[float] = None
    gap: Optional[float] = None
    wall_time: float = 0.0
    manifest_path: Optional[str] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    summary: Dict[str, Any] = Field(default_factory=dict)
    recorded_at: str = Field(default_factory=lambda: datetime.now().isoformat())
