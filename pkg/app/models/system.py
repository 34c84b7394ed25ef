"""
Symplectic System Models
=====================================
Data carried between the integration, focal-instant and reduction services.

Models:
- CoefficientPath: the blocks (A, B, C) of X = [[A, B], [C, -A^T]] on [a, b]
- InitialData: Lagrangian initial subspace encoded as a pair (P, S)
- FundamentalPath: node values of Phi with Phi' = X Phi, Phi(a) = I, plus dense output
- LagrangianPath: the curve of frames Phi(t) * frame(l0)
- Isomorphism: the pair (Z, W) defining phi = [[Z, 0], [Z^-T W, Z^-T]]

Features:
- State vectors stack (v, alpha) as columns; J = [[0, I], [-I, 0]] everywhere
- Immutable after construction, safe to share across worker processes
"""

from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
from scipy.linalg import null_space

from app.models.forms import SymForm, Subspace
from app.models.matrix_function import MatrixFunction


def canonical_j(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


@dataclass(frozen=True)
class CoefficientPath:
    n: int
    a: float
    b: float
    A: MatrixFunction
    B: MatrixFunction
    C: MatrixFunction
    label: str = ""

    @property
    def interval(self) -> Tuple[float, float]:
        return (self.a, self.b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def matrix(self, t: float) -> np.ndarray:
        a, b, c = self.A(t), self.B(t), self.C(t)
        return np.block([[a, b], [c, -a.T]])

    def b_inverse(self, t: float) -> np.ndarray:
        return np.linalg.inv(self.B(t))

    def mesh(self, points: int) -> np.ndarray:
        return np.linspace(self.a, self.b, points)


@dataclass(frozen=True)
class InitialData:
    P: Subspace
    S: SymForm

    def __post_init__(self):
        if self.S.dim != self.P.dim:
            raise ValueError(f"S acts on a {self.S.dim}-dimensional space but P has dimension {self.P.dim}")

    @classmethod
    def lagrangian_zero(cls, n: int) -> "InitialData":
        """L0 = 0 + R^n*, i.e. P = {0} and v(a) = 0."""
        return cls(Subspace.zero(n), SymForm(np.zeros((0, 0))))

    @property
    def n(self) -> int:
        return self.P.ambient_dim

    def frame(self) -> np.ndarray:
        """2n x n frame [[P, 0], [-P S, Q]] with Q spanning the annihilator of P."""
        n, k = self.n, self.P.dim
        pm = self.P.basis
        q = null_space(pm.T) if k else np.eye(n)
        top = np.hstack([pm, np.zeros((n, n - k))])
        bottom = np.hstack([-pm @ self.S.entries, q])
        return np.vstack([top, bottom])


@dataclass
class FundamentalPath:
    system: CoefficientPath
    times: np.ndarray
    values: np.ndarray
    residuals: np.ndarray           # ||Phi^T J Phi - J||_inf per node
    relative_residuals: np.ndarray  # the same over max(1, max|Phi|^2)
    propagate: Callable[[np.ndarray, float, float], np.ndarray]
    corrections: List[dict] = field(default_factory=list)
    residual_bound: float = 0.0

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def max_relative_residual(self) -> float:
        return float(np.max(self.relative_residuals)) if self.relative_residuals.size else 0.0

    def at(self, t: float) -> np.ndarray:
        """Dense output: one step of the integrator from the closest node on the left."""
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        i = int(np.searchsorted(times, t, side="right")) - 1
        if t == times[i]:
            return self.values[i]
        return self.propagate(self.values[i], float(times[i]), float(t - times[i]))


@dataclass
class LagrangianPath:
    fundamental: FundamentalPath
    frame0: np.ndarray

    @property
    def n(self) -> int:
        return self.frame0.shape[1]

    def at(self, t: float) -> np.ndarray:
        return self.fundamental.at(t) @ self.frame0

    def v_block(self, t: float) -> np.ndarray:
        return self.at(t)[: self.n]

    def node_frames(self) -> np.ndarray:
        return self.fundamental.values @ self.frame0


@dataclass(frozen=True)
class Isomorphism:
    Z: MatrixFunction
    W: MatrixFunction

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @classmethod
    def identity(cls, n: int) -> "Isomorphism":
        return cls(MatrixFunction.identity(n), MatrixFunction.zeros((n, n)))

    def matrix(self, t: float) -> np.ndarray:
        z = self.Z(t)
        z_inv_t = np.linalg.inv(z).T
        zero = np.zeros_like(z)
        return np.block([[z, zero], [z_inv_t @ self.W(t), z_inv_t]])
