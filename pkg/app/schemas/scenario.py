"""
Scenario File Schemas
=====================================
Pydantic models for scenario files (nested key/value text read with configobj).

Schemas:
- SystemBlock: an explicit symplectic or Morse-Sturm system with initial data and frame
- ManifoldBlock: a registry manifold, endpoints, reduction fields and the shooting grid
- OptionsBlock: scan resolution, tolerances, meshes, extra checks and traces
- Scenario: name, task list, exactly one of system/manifold, expected values

Features:
- Entry expressions follow the matrix grammar; numeric fields accept expressions such as 2.5*pi
- configobj splits unquoted commas into lists; matrix fields are joined back before parsing
- Errors are reported as ScenarioError with the field path or the line number
"""

import enum
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from configobj import ConfigObj, ConfigObjError
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.config import DEFAULT_MESHES, DEFAULT_STEPS, INERTIA_TOL, KERNEL_TOL, QUAD_ORDER, RANK_TOL, SCAN_FACTOR
from app.core.errors import SymplecticError
from app.models.focal import FocalOptions
from app.models.geometry import ManifoldKind
from app.services.expressions import ExpressionError, parse_scalar

logger = logging.getLogger(__name__)


class ScenarioError(SymplecticError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line


class TaskKind(str, enum.Enum):
    integrate = "integrate"
    focal = "focal"
    maslov = "maslov"
    reduce = "reduce"
    index_verify = "index-verify"
    geodesic_count = "geodesic-count"
    morse_check = "morse-check"


SYSTEM_TASKS = {TaskKind.integrate, TaskKind.focal, TaskKind.maslov, TaskKind.reduce, TaskKind.index_verify}
MANIFOLD_TASKS = {TaskKind.reduce, TaskKind.index_verify, TaskKind.geodesic_count, TaskKind.morse_check}


class SystemKind(str, enum.Enum):
    general = "general"
    morse_sturm = "morse_sturm"


class CheckKind(str, enum.Enum):
    theorem = "theorem"
    orthogonality = "orthogonality"
    carry = "carry"
    decomposition = "decomposition"
    kernel = "kernel"
    old = "old"
    additivity = "additivity"
    stability = "stability"


class TraceKind(str, enum.Enum):
    det_v = "detV"
    sigma_min = "sigma_min"
    det_bint = "detBint"
    eigenflow = "eigenflow"


# --------------------------------------------------
# value helpers shared by the validators
# --------------------------------------------------

def _listed(value) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return list(value)


def _joined(value) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(str(item) for item in value)
    return "" if value is None else str(value)


def _number(value) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(parse_scalar(str(value)).evalf())
    except (ExpressionError, TypeError) as e:
        raise ValueError(f"{value!r} is not a number: {e}")


def _numbers(value) -> List[float]:
    return [_number(item) for item in _listed(value)]


def _interval(value) -> Tuple[float, float]:
    numbers = _numbers(value)
    if len(numbers) != 2:
        raise ValueError(f"interval needs two endpoints, got {len(numbers)}")
    if not numbers[0] < numbers[1]:
        raise ValueError(f"interval must satisfy a < b, got {numbers}")
    return numbers[0], numbers[1]


def _literal(value):
    """Expected values: booleans, integers, floats, lists and nested sections."""
    if isinstance(value, dict):
        return {str(k): _literal(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_literal(v) for v in value]
    if not isinstance(value, str):
        return value
    text = value.strip()
    if text.lower() in ("true", "yes"):
        return True
    if text.lower() in ("false", "no"):
        return False
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


# --------------------------------------------------
# blocks
# --------------------------------------------------

class SystemBlock(BaseModel):
    kind: SystemKind = Field(SystemKind.general, description="'general' for (A, B, C), 'morse_sturm' for (g, R)")
    n: int = Field(..., ge=1)
    interval: Tuple[float, float]
    A: str = "0"
    B: str = "1"
    C: str = "0"
    g: str = Field("1", description="constant metric of a Morse-Sturm system")
    R: str = "0"
    P: str = Field("", description="basis vectors of P, one per row; empty for L0")
    S: str = Field("", description="symmetric form on P in the coordinates of the P basis")
    frame: str = Field("", description="n x r matrix function of t whose columns span D")
    prefix: Optional[int] = Field(None, ge=0, description="columns of the frame spanning Delta for the additivity check")

    @field_validator("A", "B", "C", "g", "R", "P", "S", "frame", mode="before")
    @classmethod
    def join_entries(cls, value):
        return _joined(value)

    @field_validator("interval", mode="before")
    @classmethod
    def parse_interval(cls, value):
        return _interval(value)


class ManifoldBlock(BaseModel):
    kind: ManifoldKind
    parameters: Dict[str, Any] = Field(default_factory=dict)
    p: List[float]
    q: List[float]
    interval: Tuple[float, float] = (0.0, 1.0)
    fields: List[str] = Field(default_factory=list, description="coordinate names or ';'-separated components")
    grid: Dict[str, List[float]] = Field(default_factory=dict, description="coordinate -> start, stop, count")
    velocity_bound: float = np.inf
    poincare: Dict[int, int] = Field(default_factory=lambda: {0: 1})
    degree_cap: Optional[int] = None

    @field_validator("p", "q", mode="before")
    @classmethod
    def parse_points(cls, value):
        return _numbers(value)

    @field_validator("interval", mode="before")
    @classmethod
    def parse_interval(cls, value):
        return _interval(value)

    @field_validator("velocity_bound", mode="before")
    @classmethod
    def parse_bound(cls, value):
        return _number(value)

    @field_validator("fields", mode="before")
    @classmethod
    def parse_list(cls, value):
        return _listed(value)

    @field_validator("grid", mode="before")
    @classmethod
    def parse_grid(cls, value):
        grid = {}
        for name, entry in dict(value or {}).items():
            numbers = _numbers(entry)
            if len(numbers) != 3 or numbers[2] < 1 or numbers[2] != int(numbers[2]):
                raise ValueError(f"grid entry {name!r} needs 'start, stop, count', got {entry!r}")
            grid[name] = [float(v) for v in np.linspace(numbers[0], numbers[1], int(numbers[2]))]
        return grid

    @model_validator(mode="after")
    def check_dimensions(self):
        if len(self.p) != len(self.q):
            raise ValueError(f"p has {len(self.p)} coordinates but q has {len(self.q)}")
        return self


class OptionsBlock(BaseModel):
    steps: int = Field(DEFAULT_STEPS, ge=8)
    scan_factor: int = Field(SCAN_FACTOR, ge=1)
    rank_tol: float = Field(RANK_TOL, gt=0)
    kernel_tol: float = Field(KERNEL_TOL, gt=0)
    inertia_tol: float = Field(INERTIA_TOL, gt=0)
    meshes: List[int] = Field(default_factory=lambda: list(DEFAULT_MESHES))
    mesh: int = Field(200, ge=8, description="single mesh for the orthogonality, carry and kernel checks")
    quad_order: int = Field(QUAD_ORDER, ge=1)
    checks: List[CheckKind] = Field(default_factory=lambda: [CheckKind.theorem])
    traces: List[TraceKind] = Field(default_factory=list)
    resolution: int = Field(400, ge=2, description="maximum number of rows of a trace")
    seed: int = 0
    hessian_elements: Optional[int] = Field(None, ge=2)

    @field_validator("meshes", "checks", "traces", mode="before")
    @classmethod
    def parse_list(cls, value):
        return _listed(value)

    @field_validator("rank_tol", "kernel_tol", "inertia_tol", mode="before")
    @classmethod
    def parse_tolerance(cls, value):
        return _number(value)

    def focal_options(self) -> FocalOptions:
        return FocalOptions(
            steps=self.steps,
            scan_factor=self.scan_factor,
            rank_tol=self.rank_tol,
            kernel_tol=self.kernel_tol,
            inertia_tol=self.inertia_tol,
        )


class Scenario(BaseModel):
    name: str
    tasks: List[TaskKind] = Field(..., min_length=1)
    system: Optional[SystemBlock] = None
    manifold: Optional[ManifoldBlock] = None
    options: OptionsBlock = Field(default_factory=OptionsBlock)
    expected: Dict[str, Any] = Field(default_factory=dict)
    source: Optional[str] = None

    @field_validator("tasks", mode="before")
    @classmethod
    def parse_tasks(cls, value):
        return _listed(value)

    @field_validator("expected", mode="before")
    @classmethod
    def parse_expected(cls, value):
        return _literal(dict(value or {}))

    @model_validator(mode="after")
    def check_blocks(self):
        if (self.system is None) == (self.manifold is None):
            raise ValueError("exactly one of the [system] and [manifold] sections is required")
        allowed = SYSTEM_TASKS if self.system is not None else MANIFOLD_TASKS
        wrong = [task.value for task in self.tasks if task not in allowed]
        if wrong:
            where = "system" if self.system is not None else "manifold"
            raise ValueError(f"task(s) {wrong} are not available for a {where} scenario")
        return self


def _location(error: dict) -> str:
    return ".".join(str(part) for part in error["loc"]) or "scenario"


def parse_scenario(data: Union[dict, ConfigObj], source: str = "<scenario>") -> Scenario:
    data = dict(data)
    data.setdefault("name", Path(source).stem)
    data.setdefault("source", source)
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = _location(first)
        raise ScenarioError(f"{source}: {field}: {first['msg']}", field=field)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        config = ConfigObj(str(path), file_error=True, raise_errors=True, interpolation=False, encoding="utf-8")
    except (IOError, OSError) as e:
        raise ScenarioError(f"{path}: cannot read scenario: {e}")
    except ConfigObjError as e:
        line = getattr(e, "line_number", None)
        raise ScenarioError(f"{path}, line {line}: {getattr(e, 'msg', e)}", line=line)
    scenario = parse_scenario(config.dict(), str(path))
    logger.debug(f"Loaded scenario {scenario.name} with tasks {[t.value for t in scenario.tasks]}")
    return scenario
