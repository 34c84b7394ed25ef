"""
Finite Element Models
=====================================
Discretization of the space H of curves v on [a, b] with v(a) in P, v(b) = 0.

Models:
- FeSpace: mesh nodes, Gauss points, and the DOF layout
    DOF l < k            -> coefficient of the l-th basis vector of P at t = a
    DOF k + (j-1) n + c  -> component c of v(t_j), j = 1..N-1
- Sampled: a family of curves known by values and derivatives at the Gauss
  points (FE DOFs, sections Y f of a frame, exact solutions)
- AssembledForm: the index form at the Gauss points plus its DOF matrix
- ConstraintSet: rank-filtered differenced F functionals whose joint kernel is K_D
- IndexTheoremReport and friends: verification outcomes
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import sparse

from app.models.forms import SymForm, Subspace


@dataclass(frozen=True)
class FeSpace:
    nodes: np.ndarray
    n: int
    P: Subspace
    points: np.ndarray   # (N, q) Gauss points per element
    weights: np.ndarray  # (N, q)

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def k(self) -> int:
        return self.P.dim

    @property
    def quad_order(self) -> int:
        return self.points.shape[1]

    @property
    def ndof(self) -> int:
        return self.k + (self.N - 1) * self.n

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.ravel()

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    def interior_index(self, j: int, c: int) -> int:
        return self.k + (j - 1) * self.n + c


@dataclass
class Sampled:
    values: sparse.csr_matrix       # (N q n, m)
    derivatives: sparse.csr_matrix  # (N q n, m)
    boundary: np.ndarray            # (k, m) P-coordinates of v(a)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def combine(self, coefficients: np.ndarray) -> "Sampled":
        """Columns are linear combinations of this family's members."""
        coefficients = np.asarray(coefficients)
        return Sampled(
            sparse.csr_matrix(self.values @ coefficients),
            sparse.csr_matrix(self.derivatives @ coefficients),
            self.boundary @ coefficients,
        )


@dataclass
class AssembledForm:
    space: FeSpace
    matrix: np.ndarray
    value_op: sparse.csr_matrix
    derivative_op: sparse.csr_matrix
    weight_b: sparse.csr_matrix  # block diag of w_q B(t_q)^-1
    weight_c: sparse.csr_matrix  # block diag of w_q C(t_q)
    drift: sparse.csr_matrix     # block diag of A(t_q)
    boundary: SymForm            # S on P

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))

    def dofs(self) -> Sampled:
        k, ndof = self.space.k, self.space.ndof
        boundary = np.zeros((k, ndof))
        boundary[:, :k] = np.eye(k)
        return Sampled(self.value_op, self.derivative_op, boundary)

    def cross(self, x: Sampled, y: Sampled) -> np.ndarray:
        """Matrix I(x_i, y_j) evaluated at the Gauss points."""
        ax = x.derivatives - self.drift @ x.values
        ay = y.derivatives - self.drift @ y.values
        value = ax.T @ self.weight_b @ ay + x.values.T @ self.weight_c @ y.values
        value = value.toarray() if sparse.issparse(value) else np.asarray(value)
        if x.boundary.size and y.boundary.size:
            value = value - x.boundary.T @ self.boundary.entries @ y.boundary
        return value


@dataclass
class ConstraintSet:
    rows: np.ndarray             # (r (N-1), ndof) differenced F functionals on the DOFs
    singular_values: np.ndarray
    rank: int
    kernel: np.ndarray           # (ndof, ndof - rank) orthonormal basis of K_D
    sections: Sampled            # S_D at the Gauss points
    f_lambda: np.ndarray         # (r (N-1), r (N-1)) the functionals on S_D, i.e. F o lambda
    g_value: sparse.csr_matrix   # functionals acting on samples of v at `points`
    g_derivative: sparse.csr_matrix
    points: np.ndarray

    @property
    def dropped(self) -> int:
        return self.rows.shape[0] - self.rank

    def residual(self, values: np.ndarray, derivatives: np.ndarray) -> float:
        """max |F(v)(m_j) - F(v)(m_{j-1})| for a curve given by (len(points), n) samples of v and v'."""
        if not self.rows.size:
            return 0.0
        applied = self.g_value @ np.ravel(values) + self.g_derivative @ np.ravel(derivatives)
        return float(np.max(np.abs(applied)))


@dataclass
class MeshRecord:
    N: int
    n_minus: int
    n_plus: int
    degeneracy: int
    smallest: List[float] = field(default_factory=list)


@dataclass
class IndexTheoremReport:
    lhs: Optional[int]
    rhs_terms: Dict[str, int]
    meshes: List[int]
    residuals: Dict[str, float]
    verdict: str
    stabilized_at: Optional[int] = None
    eigenflow: List[MeshRecord] = field(default_factory=list)

    @property
    def rhs(self) -> int:
        terms = self.rhs_terms
        return terms["maslov"] - terms["maslov_red"] + terms["correction"]

    def as_dict(self) -> dict:
        data = asdict(self)
        data["rhs"] = self.rhs
        return data


@dataclass
class OldIndexReport:
    n_minus_k: Optional[int]
    n_plus_s: Optional[int]
    correction: int
    maslov: int
    meshes: List[int]
    verdict: str

    @property
    def lhs(self) -> Optional[int]:
        if self.n_minus_k is None or self.n_plus_s is None:
            return None
        return self.n_minus_k - self.n_plus_s - self.correction

    def as_dict(self) -> dict:
        data = asdict(self)
        data["lhs"] = self.lhs
        return data


@dataclass
class DecompositionReport:
    meshes: List[int]
    smallest: List[float]
    extrapolated: Optional[float]
    sigma: Optional[float]
    condition: Optional[float]
    decomposes: bool
    reduced_conjugate: Optional[bool] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class KernelReport:
    meshes: List[int]
    candidates: List[float]
    degeneracy: int
    multiplicity: int

    @property
    def matches(self) -> bool:
        return self.degeneracy == self.multiplicity

    def as_dict(self) -> dict:
        data = asdict(self)
        data["matches"] = self.matches
        return data


@dataclass
class AdditivityReport:
    k_delta: int
    k_d: int
    k_delta_red: int
    mesh: int

    @property
    def holds(self) -> bool:
        return self.k_delta == self.k_d + self.k_delta_red

    def as_dict(self) -> dict:
        data = asdict(self)
        data["holds"] = self.holds
        return data
