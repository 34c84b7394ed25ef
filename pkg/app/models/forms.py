"""
Bilinear Form Models
=====================================
Value types for the finite-dimensional linear algebra layer.

Models:
- SymForm: symmetric bilinear form on R^dim, stored as an exactly symmetric matrix
- Subspace: subspace of R^n stored through a Euclidean-orthonormal basis

Features:
- Symmetrization on construction, so entries == entries.T bit for bit
- Characteristic scale carried with the form for relative rank decisions
- Bases stay Euclidean-orthonormal even when the form living on them is indefinite
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import orth, svd


@dataclass
class SymForm:
    entries: np.ndarray
    scale: Optional[float] = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if m.size == 0:
            m = np.zeros((m.shape[0], m.shape[0]))
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"a bilinear form needs a square matrix, got {m.shape}")
        self.entries = 0.5 * (m + m.T)
        if self.scale is None:
            peak = float(np.max(np.abs(self.entries))) if self.entries.size else 0.0
            self.scale = peak if peak > 0.0 else 1.0
        if self.scale <= 0.0:
            raise ValueError("form scale must be positive")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __call__(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(np.asarray(v) @ self.entries @ np.asarray(w))


@dataclass
class Subspace:
    basis: np.ndarray
    ambient_dim: int = field(init=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        self.basis = b
        self.ambient_dim = b.shape[0]
        if b.shape[1] > b.shape[0]:
            raise ValueError("more basis vectors than the ambient dimension")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @classmethod
    def span(cls, vectors, tol: float = 1e-10) -> "Subspace":
        """Orthonormal basis of the column span of `vectors` (n x k)."""
        m = np.asarray(vectors, dtype=float)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        if m.shape[1] == 0 or not np.any(m):
            return cls.zero(m.shape[0])
        return cls(orth(m, rcond=tol))

    @classmethod
    def column_space(cls, matrix, rel_tol: float) -> "Subspace":
        """Numerical image of a matrix: left singular vectors above rel_tol * sigma_max."""
        m = np.asarray(matrix, dtype=float)
        if m.size == 0:
            return cls.zero(m.shape[0])
        u, s, _ = svd(m)
        if s.size == 0 or s[0] == 0.0:
            return cls.zero(m.shape[0])
        rank = int(np.sum(s > rel_tol * max(s[0], 1.0)))
        return cls(u[:, :rank])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T
