"""
Reduction Models
=====================================
Frames of smooth families of subspaces and the reduced coefficients they induce.

Models:
- Frame: r evaluable columns Y_1..Y_r spanning D_t, with solution/symmetry flags
- ReducedCoefficients: the r x r matrix functions (cal A, frak B, cal C)
- BIntegralPath: cumulative integral of frak B^-1 and its degeneracy instants
"""

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from app.models.matrix_function import MatrixFunction


@dataclass(frozen=True)
class Frame:
    Y: MatrixFunction
    is_solution_frame: bool = False
    is_symmetric_frame: bool = False

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def rank(self) -> int:
        return self.Y.shape[1]

    def prefix(self, k: int) -> "Frame":
        """The sub-frame Y_1..Y_k of a family Delta contained in D."""
        if not 0 <= k <= self.rank:
            raise ValueError(f"prefix length {k} outside 0..{self.rank}")
        return replace(self, Y=self.Y.columns(slice(0, k)))

    @classmethod
    def empty(cls, n: int) -> "Frame":
        return cls(MatrixFunction.zeros((n, 0)), True, True)


@dataclass(frozen=True)
class ReducedCoefficients:
    frak_a: MatrixFunction  # cal A_ij = alpha_{Y_j}(Y_i)
    frak_b: MatrixFunction  # frak B_ij = B^-1(Y_i, Y_j)
    frak_c: MatrixFunction  # cal C_ij = B(alpha_{Y_i}, alpha_{Y_j}) + C(Y_i, Y_j)
    index: int
    a: float
    b: float

    @property
    def r(self) -> int:
        return self.frak_b.shape[0]

    @property
    def a_sym(self) -> MatrixFunction:
        return self.frak_a.symmetrized()

    @property
    def a_ant(self) -> MatrixFunction:
        return (self.frak_a - self.frak_a.T).scale(0.5)


@dataclass
class DegeneracyInstant:
    t: float
    multiplicity: int

    def as_dict(self) -> dict:
        return {"t": self.t, "multiplicity": self.multiplicity}


@dataclass
class BIntegralPath:
    times: np.ndarray
    values: np.ndarray
    integrand: MatrixFunction
    instants: List[DegeneracyInstant] = field(default_factory=list)
    endpoint_degenerate: bool = False

    def at(self, t: float) -> np.ndarray:
        """Node value plus a Simpson panel from the node on the left."""
        times = self.times
        if t <= times[0]:
            return np.zeros_like(self.values[0])
        if t >= times[-1]:
            return self.values[-1]
        i = int(np.searchsorted(times, t, side="right")) - 1
        s = times[i]
        if t == s:
            return self.values[i]
        f = self.integrand
        return self.values[i] + (t - s) / 6.0 * (f(s) + 4.0 * f(0.5 * (s + t)) + f(t))
