"""
Focal Instant Models
=====================================
Results of the crossing analysis of a Lagrangian path l(t) = Phi(t) l0.

Models:
- FocalOptions: scan resolution and the tolerances of the crossing detector
- FocalInstant: one instant with multiplicity, signature and nondegeneracy
- MaslovReport: ordered instants, the start offset epsilon and the signed total
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from app.core.config import DEFAULT_STEPS, INERTIA_TOL, KERNEL_TOL, RANK_TOL, SCAN_FACTOR


@dataclass
class FocalOptions:
    steps: int = DEFAULT_STEPS
    scan_factor: int = SCAN_FACTOR
    # sigma_min of the orthonormal V-block at or below rank_tol marks a scan sample as singular
    rank_tol: float = RANK_TOL
    # decides kernel dimensions, refined minima and whether t = b is focal (rank_tol plays no part there)
    kernel_tol: float = KERNEL_TOL
    inertia_tol: float = INERTIA_TOL
    # absolute; None means 1e-6 * (b - a)
    min_separation: Optional[float] = None

    def separation(self, length: float) -> float:
        return self.min_separation if self.min_separation is not None else 1e-6 * length


@dataclass
class FocalInstant:
    t: float
    multiplicity: int
    signature: int
    nondegenerate: bool

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "multiplicity": self.multiplicity,
            "signature": self.signature,
            "nondegenerate": self.nondegenerate,
        }


@dataclass
class MaslovReport:
    instants: List[FocalInstant]
    epsilon: float
    total: Optional[int]
    valid: bool
    trace: List[Tuple[float, float, float]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return sum(i.multiplicity for i in self.instants)

    def as_dict(self) -> dict:
        return {
            "instants": [i.as_dict() for i in self.instants],
            "epsilon": self.epsilon,
            "total": self.total,
            "valid": self.valid,
            "warnings": list(self.warnings),
        }
