"""
Report Schemas
=====================================
Pydantic models for the JSON reports written by `run`.

Schemas:
- TaskStatus: ok, mismatch (expected values differ) or failed (error raised)
- TaskReport: summary integers compared against the expected block, full task
  result, the option set used and the error message of a failed task

Features:
- Deterministic JSON: sorted keys, floats rounded to 12 decimals, non-finite
  floats written as strings
"""

import enum
import json
import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

PRECISION = 12


class TaskStatus(str, enum.Enum):
    ok = "ok"
    mismatch = "mismatch"
    failed = "failed"


def normalized(value):
    """Plain JSON types with floats rounded to PRECISION decimals."""
    if isinstance(value, dict):
        return {str(k): normalized(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalized(v) for v in value]
    if isinstance(value, np.ndarray):
        return normalized(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        rounded = round(value, PRECISION)
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, enum.Enum):
        return value.value
    return value


class TaskReport(BaseModel):
    scenario: str
    task: str
    status: TaskStatus
    summary: Dict[str, Any] = Field(default_factory=dict, description="values compared against the expected block")
    expected: Dict[str, Any] = Field(default_factory=dict)
    mismatches: List[str] = Field(default_factory=list)
    result: Dict[str, Any] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None
    error_kind: Optional[str] = Field(None, description="exception class of a failed task")

    def to_json(self) -> str:
        return json.dumps(normalized(self.model_dump(mode="python")), sort_keys=True, indent=2) + "\n"
