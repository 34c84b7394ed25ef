"""
Symplectic Differential Systems
=====================================
Construction, validation and integration of linear systems

    v' = A v + B alpha,    alpha' = C v - A^T alpha

with B, C symmetric and B invertible, together with Lagrangian initial data
and isomorphisms of systems.

Features:
- Morse-Sturm systems from a constant metric g and a curvature path R
- Fixed-step RK4 for the fundamental matrix with a polar-type re-projection
  onto the symplectic group when the J-invariance residual drifts
- Dense output by a single integrator step from the nearest node
- alpha_v = B^-1 (v' - A v) for arbitrary differentiable paths
- Isomorphisms phi = [[Z, 0], [Z^-T W, Z^-T]] acting on systems and initial data
"""

import logging
from functools import partial
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import lstsq, orth

from app.core.config import DEFAULT_STEPS, INERTIA_TOL, SYMPLECTIC_TOL
from app.core.errors import SymplecticError
from app.models.forms import SymForm, Subspace
from app.models.system import (
    CoefficientPath,
    FundamentalPath,
    InitialData,
    Isomorphism,
    LagrangianPath,
    canonical_j,
)
from app.services.bilinear import inertia, restrict
from app.models.matrix_function import MatrixFunction

logger = logging.getLogger(__name__)

MAX_REPROJECTIONS = 3
CHECK_POINTS = 65


class SystemDefinitionError(SymplecticError):
    pass


class IntegrationError(SymplecticError):
    pass


class IsomorphismError(SymplecticError):
    pass


# --------------------------------------------------
# construction
# --------------------------------------------------

def coefficient_index(X: CoefficientPath, points: int = CHECK_POINTS, tol: float = INERTIA_TOL) -> int:
    """
    Validate X on a mesh and return k = n_minus(B(t)).

    B and C must be symmetric, B invertible with constant index.
    """
    if X.n == 0:
        return 0
    index = None
    for t in X.mesh(points):
        b, c = X.B(t), X.C(t)
        scale = max(1.0, float(np.max(np.abs(b))), float(np.max(np.abs(c))) if c.size else 0.0)
        if np.max(np.abs(b - b.T), initial=0.0) > 1e-10 * scale:
            raise SystemDefinitionError(f"B is not symmetric at t={t:.12g}")
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-10 * scale:
            raise SystemDefinitionError(f"C is not symmetric at t={t:.12g}")
        n_minus, _, degeneracy = inertia(SymForm(b), tol)
        if degeneracy:
            raise SystemDefinitionError(f"B is singular at t={t:.12g}")
        if index is None:
            index = n_minus
        elif n_minus != index:
            raise SystemDefinitionError(f"index of B changes from {index} to {n_minus} at t={t:.12g}")
    return int(index or 0)


def make_system(
    A: MatrixFunction,
    B: MatrixFunction,
    C: MatrixFunction,
    interval: Tuple[float, float],
    label: str = "",
) -> CoefficientPath:
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise SystemDefinitionError(f"interval must satisfy a < b, got [{a}, {b}]")
    n = B.shape[0]
    for name, block in (("A", A), ("B", B), ("C", C)):
        if block.shape != (n, n):
            raise SystemDefinitionError(f"{name} has shape {block.shape}, expected {(n, n)}")
    X = CoefficientPath(n=n, a=a, b=b, A=A, B=B, C=C, label=label)
    coefficient_index(X)
    return X


def make_morse_sturm(
    g: SymForm,
    R: MatrixFunction,
    interval: Tuple[float, float],
    label: str = "",
    points: int = CHECK_POINTS,
) -> CoefficientPath:
    """A = 0, B = g^-1, C = g R."""
    if inertia(g)[2]:
        raise SystemDefinitionError("metric g is degenerate")
    n = g.dim
    if R.shape != (n, n):
        raise SystemDefinitionError(f"R has shape {R.shape}, expected {(n, n)}")
    gm = MatrixFunction.constant(g.entries, label="g")
    gR = gm @ R
    for t in np.linspace(interval[0], interval[1], points):
        c = gR(t)
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(c - c.T)) > 1e-9 * scale:
            raise SystemDefinitionError(f"g R is not symmetric at t={t:.12g}")
    B = MatrixFunction.constant(np.linalg.inv(g.entries), label="g^-1")
    return CoefficientPath(
        n=n,
        a=float(interval[0]),
        b=float(interval[1]),
        A=MatrixFunction.zeros((n, n)),
        B=B,
        C=gR.symmetrized(),
        label=label or "morse-sturm",
    )


def alpha_of(X: CoefficientPath, v: MatrixFunction) -> MatrixFunction:
    """alpha_v = B^-1 (v' - A v); v may be a vector (n,) or a matrix of columns (n, r)."""
    column = v if len(v.shape) == 2 else _as_column(v)
    dv = column.derivative(step=column.step)
    b_inv = X.B.inv()
    alpha = b_inv @ (dv - X.A @ column)
    if len(v.shape) == 2:
        return alpha
    fn = alpha.__call__
    return MatrixFunction(lambda t: fn(t)[:, 0], v.shape, step=v.step)


def _as_column(v: MatrixFunction) -> MatrixFunction:
    if v.expr is not None:
        return MatrixFunction.symbolic(v.expr.reshape(v.shape[0], 1), step=v.step)
    fn = v.__call__
    derivative = (lambda: _as_column(v.derivative())) if v.exact else None
    return MatrixFunction(lambda t: fn(t).reshape(-1, 1), (v.shape[0], 1), derivative=derivative, step=v.step)


# --------------------------------------------------
# integration
# --------------------------------------------------

def rk4_step(X: CoefficientPath, phi: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = X.matrix(t) @ phi
    mid = X.matrix(t + 0.5 * h)
    k2 = mid @ (phi + 0.5 * h * k1)
    k3 = mid @ (phi + 0.5 * h * k2)
    k4 = X.matrix(t + h) @ (phi + h * k3)
    return phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def symplectic_residual(phi: np.ndarray, j: np.ndarray) -> float:
    """||Phi^T J Phi - J||_inf (maximum absolute row sum)."""
    defect = phi.T @ j @ phi - j
    return float(np.max(np.sum(np.abs(defect), axis=1), initial=0.0))


def relative_symplectic_residual(phi: np.ndarray, j: np.ndarray) -> float:
    """The absolute residual over max(1, max|Phi|^2), the round-off floor of Phi^T J Phi."""
    growth = max(1.0, float(np.max(np.abs(phi), initial=0.0)) ** 2)
    return symplectic_residual(phi, j) / growth


def reproject(phi: np.ndarray, j: np.ndarray) -> np.ndarray:
    """First-order correction Phi (I + J Delta / 2), Delta = Phi^T J Phi - J."""
    delta = phi.T @ j @ phi - j
    delta = 0.5 * (delta - delta.T)
    return phi @ (np.eye(phi.shape[0]) + 0.5 * j @ delta)


def integrate_fundamental(
    X: CoefficientPath,
    steps: int = DEFAULT_STEPS,
    tol: float = SYMPLECTIC_TOL,
) -> FundamentalPath:
    if steps < 8:
        raise IntegrationError(f"at least 8 steps are required, got {steps}")
    n2 = 2 * X.n
    j = canonical_j(X.n)
    times = np.linspace(X.a, X.b, steps + 1)
    values = np.empty((steps + 1, n2, n2))
    residuals = np.zeros(steps + 1)
    relative = np.zeros(steps + 1)
    values[0] = np.eye(n2)
    corrections = []

    for i in range(steps):
        h = times[i + 1] - times[i]
        phi = rk4_step(X, values[i], times[i], h)
        residual = symplectic_residual(phi, j)
        if residual > tol:
            before = residual
            for _ in range(MAX_REPROJECTIONS):
                phi = reproject(phi, j)
                residual = symplectic_residual(phi, j)
                if residual <= tol:
                    break
            corrections.append({"t": float(times[i + 1]), "before": before, "after": residual})
            logger.warning(f"Re-projected Phi at t={times[i + 1]:.6g}: residual {before:.3e} -> {residual:.3e}")
            # above tol only by round-off once |Phi| has grown
            if residual > tol and relative_symplectic_residual(phi, j) > tol:
                raise IntegrationError(
                    f"symplectic residual {residual:.3e} above {tol:.1e} at t={times[i + 1]:.12g} after re-projection"
                )
        values[i + 1] = phi
        residuals[i + 1] = residual
        relative[i + 1] = relative_symplectic_residual(phi, j)

    logger.debug(f"Integrated {X.label or 'system'} with {steps} steps, max residual {residuals.max():.3e}")
    return FundamentalPath(
        system=X,
        times=times,
        values=values,
        residuals=residuals,
        relative_residuals=relative,
        propagate=partial(rk4_step, X),
        corrections=corrections,
        residual_bound=tol,
    )


def lagrangian_frame(path: FundamentalPath, ell0: InitialData) -> LagrangianPath:
    return LagrangianPath(fundamental=path, frame0=ell0.frame())


def lagrangian_residual(frame: np.ndarray) -> float:
    """max |F^T J F|, zero exactly when the columns of F span an isotropic subspace."""
    n = frame.shape[0] // 2
    return float(np.max(np.abs(frame.T @ canonical_j(n) @ frame)))


def initial_data_from_frame(frame: np.ndarray, rel_tol: float = 1e-10) -> InitialData:
    """Recover (P, S) from any 2n x n frame of a Lagrangian subspace."""
    n = frame.shape[0] // 2
    top, bottom = frame[:n], frame[n:]
    if not np.any(np.abs(top) > rel_tol * max(1.0, float(np.max(np.abs(frame))))):
        return InitialData.lagrangian_zero(n)
    P = Subspace(orth(top, rcond=rel_tol))
    coeffs = lstsq(top, P.basis)[0]
    S = -(bottom @ coeffs).T @ P.basis
    return InitialData(P, SymForm(S))


def initial_condition_index(X: CoefficientPath, ell0: InitialData, tol: float = INERTIA_TOL) -> Tuple[int, bool]:
    """(n_minus(B(a)^-1 restricted to P), nondegenerate)."""
    form = restrict(SymForm(X.b_inverse(X.a)), ell0.P)
    n_minus, _, degeneracy = inertia(form, tol)
    return n_minus, degeneracy == 0


# --------------------------------------------------
# isomorphisms
# --------------------------------------------------

def apply_isomorphism(
    phi: Isomorphism,
    X: CoefficientPath,
    ell0: Optional[InitialData] = None,
    points: int = CHECK_POINTS,
) -> Tuple[CoefficientPath, Optional[InitialData]]:
    """X~ = phi' phi^-1 + phi X phi^-1 and l0~ = phi(a) l0."""
    n = X.n
    if phi.n != n:
        raise IsomorphismError(f"isomorphism acts on R^{phi.n}, system on R^{n}")
    for t in X.mesh(points):
        z = phi.Z(t)
        if np.linalg.cond(z) > 1e12:
            raise IsomorphismError(f"Z is singular at t={t:.12g}")

    h = 1e-5 * X.length
    dZ = phi.Z.derivative(step=h)
    dW = phi.W.derivative(step=h)

    last = {}

    def transformed(t: float) -> np.ndarray:
        if last.get("t") == t:
            return last["value"]
        z, w = phi.Z(t), phi.W(t)
        dz, dw = dZ(t), dW(t)
        z_inv_t = np.linalg.inv(z).T
        dz_inv_t = -z_inv_t @ dz.T @ z_inv_t
        zero = np.zeros((n, n))
        p = np.block([[z, zero], [z_inv_t @ w, z_inv_t]])
        dp = np.block([[dz, zero], [dz_inv_t @ w + z_inv_t @ dw, dz_inv_t]])
        p_inv = np.linalg.inv(p)
        last["t"], last["value"] = t, dp @ p_inv + p @ X.matrix(t) @ p_inv
        return last["value"]

    def block(rows: slice, cols: slice, symmetric: bool):
        def evaluate(t: float) -> np.ndarray:
            m = transformed(t)[rows, cols]
            return 0.5 * (m + m.T) if symmetric else m

        return MatrixFunction.from_callable(evaluate, (n, n), X.interval)

    top, low = slice(0, n), slice(n, 2 * n)
    X_tilde = CoefficientPath(
        n=n,
        a=X.a,
        b=X.b,
        A=block(top, top, False),
        B=block(top, low, True),
        C=block(low, top, True),
        label=f"{X.label}~" if X.label else "isomorphic",
    )
    if ell0 is None:
        return X_tilde, None
    return X_tilde, initial_data_from_frame(phi.matrix(X.a) @ ell0.frame())


def isomorphism_residual(
    phi: Isomorphism,
    path: FundamentalPath,
    path_tilde: FundamentalPath,
) -> float:
    """max over nodes of |Phi~(t) - phi(t) Phi(t) phi(a)^-1| relative to |Phi~(t)|."""
    if path.times.shape != path_tilde.times.shape:
        raise IsomorphismError("both paths must share the integration mesh")
    phi_a_inv = np.linalg.inv(phi.matrix(path.times[0]))
    worst = 0.0
    for t, value, value_tilde in zip(path.times, path.values, path_tilde.values):
        expected = phi.matrix(t) @ value @ phi_a_inv
        scale = max(1.0, float(np.max(np.abs(value_tilde))))
        worst = max(worst, float(np.max(np.abs(value_tilde - expected))) / scale)
    return worst


def solution_residual(X: CoefficientPath, path: FundamentalPath, state0: np.ndarray, points: int = 200) -> float:
    """Residual of the system along the dense output of Phi(t) state0 (central differences)."""
    h = 1e-5 * X.length
    worst = 0.0
    for t in np.linspace(X.a + 2 * h, X.b - 2 * h, points):
        z = path.at(t) @ state0
        dz = (path.at(t + h) @ state0 - path.at(t - h) @ state0) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(z))))
        worst = max(worst, float(np.max(np.abs(dz - X.matrix(t) @ z))) / scale)
    return worst
