"""
Geometry Models
=====================================
Model manifolds, geodesics and the Morse-Sturm data derived from them.

Models:
- ManifoldKind: registry id of a model manifold
- ModelManifold: coordinates and symbolic metric, periodic coordinates, Godel split
- GeodesicCurve: sampled geodesic with optional parallel frame along it
- GeodesicSystem: a geodesic together with its Morse-Sturm system and initial data
- BaseCurve: curve in the base of a Godel-type manifold (smooth or piecewise linear)
- GeodesicRecord / ShootingResult: outcome of a shooting run
- MorseVerdict: outcome of the Morse relations check

Features:
- Coordinates are sympy symbols; the metric is an immutable sympy matrix
- Godel-type manifolds keep the base dimension m and fiber rank r
- Curves carry dense output through cubic splines of their samples
"""

import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy
from scipy.interpolate import CubicSpline

from app.models.forms import SymForm
from app.models.system import CoefficientPath, InitialData


class ManifoldKind(str, enum.Enum):
    flat = "flat"
    sphere = "sphere"
    stationary_sphere = "stationary_sphere"
    godel = "godel"


@dataclass(frozen=True)
class ModelManifold:
    kind: ManifoldKind
    coordinates: Tuple[sympy.Symbol, ...]
    metric: sympy.ImmutableMatrix
    periods: Dict[int, float] = field(default_factory=dict)
    base_dim: int = 0
    fiber_dim: int = 0
    parameters: Dict[str, object] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.coordinates]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown coordinate {name!r}; coordinates are {self.names}")

    def wrap(self, delta: np.ndarray) -> np.ndarray:
        """Reduce coordinate differences of periodic coordinates to [-period/2, period/2)."""
        delta = np.array(delta, dtype=float)
        for i, period in self.periods.items():
            delta[i] = (delta[i] + 0.5 * period) % period - 0.5 * period
        return delta


@dataclass
class GeodesicCurve:
    times: np.ndarray
    positions: np.ndarray      # (len(times), n)
    velocities: np.ndarray     # (len(times), n)
    residual: float = 0.0      # endpoint residual of the boundary value problem
    frames: Optional[np.ndarray] = None  # (len(times), n, n) parallel frame E(t)
    frame_corrections: List[dict] = field(default_factory=list)

    def __post_init__(self):
        self._position = CubicSpline(self.times, self.positions, axis=0)
        self._velocity = CubicSpline(self.times, self.velocities, axis=0)

    @property
    def a(self) -> float:
        return float(self.times[0])

    @property
    def b(self) -> float:
        return float(self.times[-1])

    @property
    def initial_velocity(self) -> np.ndarray:
        return self.velocities[0]

    def position(self, t: float) -> np.ndarray:
        return self._position(t)

    def velocity(self, t: float) -> np.ndarray:
        return self._velocity(t)


@dataclass
class GeodesicSystem:
    curve: GeodesicCurve
    g: SymForm
    system: CoefficientPath
    ell0: InitialData


@dataclass
class BaseCurve:
    """x(t) on [a, b] with velocity; quadratures split at the breakpoints."""
    position: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    breakpoints: np.ndarray

    @property
    def a(self) -> float:
        return float(self.breakpoints[0])

    @property
    def b(self) -> float:
        return float(self.breakpoints[-1])


@dataclass
class FiberPath:
    """u(t) over a Godel base curve; rho(x(t)) u'(t) == momentum."""
    position: Callable[[float], np.ndarray]
    momentum: np.ndarray


@dataclass
class GeodesicRecord:
    curve: GeodesicCurve
    maslov: int
    maslov_red: int

    @property
    def index(self) -> int:
        return self.maslov - self.maslov_red

    def as_dict(self) -> dict:
        return {
            "initial_velocity": [float(v) for v in self.curve.initial_velocity],
            "endpoint_residual": self.curve.residual,
            "maslov": self.maslov,
            "maslov_red": self.maslov_red,
            "index": self.index,
        }


@dataclass
class ShootingResult:
    geodesics: List[GeodesicRecord]
    seeds: int
    unresolved: int
    rejected_focal: int
    rejected_bound: int

    def counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for record in self.geodesics:
            counts[record.index] = counts.get(record.index, 0) + 1
        return counts

    def as_dict(self) -> dict:
        return {
            "geodesics": [g.as_dict() for g in self.geodesics],
            "counts": {str(k): v for k, v in sorted(self.counts().items())},
            "seeds": self.seeds,
            "unresolved": self.unresolved,
            "rejected_focal": self.rejected_focal,
            "rejected_bound": self.rejected_bound,
        }


@dataclass
class MorseVerdict:
    holds: bool
    q: List[int]
    violated_degree: Optional[int] = None

    def as_dict(self) -> dict:
        return {"holds": self.holds, "q": list(self.q), "violated_degree": self.violated_degree}
