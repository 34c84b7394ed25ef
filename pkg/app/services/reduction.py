"""
Reduced Symplectic Systems
=====================================
Reduction of a symplectic system along a nondegenerate smooth family of
subspaces D_t = span(Y_1(t), ..., Y_r(t)).

Features:
- classification of frames (solution frames, symmetric frames)
- reduced coefficients cal A, frak B, cal C and the reduced system X_red
- the isomorphic normal form X~_red driven by the antisymmetric part of cal A
- the B-integral B^int(t) = int_a^t frak B^-1 and its degeneracy instants
- the reduced Maslov shortcut summing signatures of frak B on Im(B^int)^perp
- residual of the "solution along D" equation through the operator F
"""

import logging
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from app.core.config import DEFAULT_STEPS, INERTIA_TOL, KERNEL_TOL
from app.core.errors import SymplecticError
from app.models.forms import SymForm, Subspace
from app.models.reduction import BIntegralPath, DegeneracyInstant, Frame, ReducedCoefficients
from app.models.system import CoefficientPath
from app.services.bilinear import inertia, restrict, signature_on_complement
from app.models.matrix_function import MatrixFunction
from app.services.sds import CHECK_POINTS, alpha_of, coefficient_index

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-6
DIP_CUTOFF = 0.25


class ReductionError(SymplecticError):
    pass


class DegenerateFamilyError(ReductionError):
    pass


def _scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m), initial=0.0)))


def classify_frame(X: CoefficientPath, frame: Frame, points: int = CHECK_POINTS, tol: float = FRAME_TOL) -> Frame:
    """Set is_solution_frame / is_symmetric_frame from numerical checks on a mesh."""
    if frame.rank == 0:
        return Frame(frame.Y, True, True)
    Y = frame.Y
    alpha = alpha_of(X, Y)
    d_alpha = alpha.derivative(step=1e-5 * X.length)

    solution_residual = 0.0
    symmetry_residual = 0.0
    for t in X.mesh(points):
        y, al = Y(t), alpha(t)
        rhs = X.C(t) @ y - X.A(t).T @ al
        solution_residual = max(solution_residual, float(np.max(np.abs(d_alpha(t) - rhs))) / _scale(rhs))
        cross = y.T @ al
        symmetry_residual = max(symmetry_residual, float(np.max(np.abs(cross - cross.T))) / _scale(cross))

    logger.debug(f"Frame residuals: solution {solution_residual:.3e}, symmetry {symmetry_residual:.3e}")
    return Frame(Y, solution_residual <= tol, symmetry_residual <= tol)


def frame_change(frame: Frame, M: MatrixFunction) -> Frame:
    """Y -> Y M(t); M(t) invertible r x r."""
    if M.shape != (frame.rank, frame.rank):
        raise ReductionError(f"frame change must be {frame.rank}x{frame.rank}, got {M.shape}")
    return Frame(frame.Y @ M)


def reduced_coefficients(X: CoefficientPath, frame: Frame, points: int = CHECK_POINTS) -> ReducedCoefficients:
    if frame.n != X.n:
        raise ReductionError(f"frame lives in R^{frame.n}, system in R^{X.n}")
    Y = frame.Y
    alpha = alpha_of(X, Y)
    frak_b = (Y.T @ X.B.inv() @ Y).symmetrized()
    frak_a = Y.T @ alpha
    frak_c = (alpha.T @ X.B @ alpha + Y.T @ X.C @ Y).symmetrized()

    index = None
    if frame.rank:
        for t in X.mesh(points):
            if np.linalg.matrix_rank(Y(t)) < frame.rank:
                raise DegenerateFamilyError(f"frame columns are dependent at t={t:.12g}")
            n_minus, _, degeneracy = inertia(SymForm(frak_b(t)), INERTIA_TOL)
            if degeneracy:
                raise DegenerateFamilyError(f"frak B is degenerate at t={t:.12g}; the family is not nondegenerate")
            if index is None:
                index = n_minus
            elif index != n_minus:
                raise DegenerateFamilyError(f"index of frak B changes at t={t:.12g}")

    return ReducedCoefficients(frak_a, frak_b, frak_c, int(index or 0), X.a, X.b)


def build_reduced(X: CoefficientPath, frame: Frame, reduced: Optional[ReducedCoefficients] = None) -> CoefficientPath:
    """A_red = -frak B^-1 cal A, B_red = frak B^-1, C_red = cal C - cal A^T frak B^-1 cal A."""
    reduced = reduced or reduced_coefficients(X, frame)
    b_inv = reduced.frak_b.inv()
    X_red = CoefficientPath(
        n=reduced.r,
        a=X.a,
        b=X.b,
        A=-(b_inv @ reduced.frak_a),
        B=b_inv.symmetrized(),
        C=(reduced.frak_c - reduced.frak_a.T @ b_inv @ reduced.frak_a).symmetrized(),
        label=f"{X.label}/red" if X.label else "reduced",
    )
    index = coefficient_index(X_red)
    if index != reduced.index:
        raise ReductionError(f"reduced system has index {index}, family has index {reduced.index}")
    return X_red


def build_tilde_reduced(
    X: CoefficientPath,
    frame: Frame,
    reduced: Optional[ReducedCoefficients] = None,
    tol: float = FRAME_TOL,
    points: int = CHECK_POINTS,
) -> CoefficientPath:
    """A~ = -frak B^-1 A_ant, B~ = frak B^-1, C~ = cal C - A_sym' + A_ant frak B^-1 A_ant."""
    reduced = reduced or reduced_coefficients(X, frame)
    b_inv = reduced.frak_b.inv()
    a_ant = reduced.a_ant
    d_sym = reduced.a_sym.derivative(step=1e-5 * X.length)
    X_tilde = CoefficientPath(
        n=reduced.r,
        a=X.a,
        b=X.b,
        A=-(b_inv @ a_ant),
        B=b_inv.symmetrized(),
        C=(reduced.frak_c - d_sym + a_ant @ b_inv @ a_ant).symmetrized(),
        label=f"{X.label}/red~" if X.label else "reduced~",
    )

    if frame.is_solution_frame and frame.is_symmetric_frame and reduced.r:
        for t in X.mesh(points):
            scale = _scale(reduced.frak_c(t))
            a_val, c_val = X_tilde.A(t), X_tilde.C(t)
            if np.max(np.abs(a_val)) > tol * scale or np.max(np.abs(c_val)) > tol * scale:
                raise ReductionError(
                    f"symmetric solution frame but X~_red is not (0, frak B^-1, 0) at t={t:.12g}"
                )
    return X_tilde


def _g_measures(path: BIntegralPath, a: float, t: float):
    g = path.at(t) / (t - a)
    det = float(np.linalg.det(g))
    sigma = float(np.linalg.svd(g, compute_uv=False)[-1])
    return det, sigma


def b_integral(
    reduced: ReducedCoefficients,
    steps: int = DEFAULT_STEPS,
    kernel_tol: float = KERNEL_TOL,
) -> BIntegralPath:
    """
    B^int(t) = int_a^t frak B(s)^-1 ds by composite Simpson, plus the instants in
    ]a, b] where it degenerates.

    Degeneracy is read off B^int(t) / (t - a), which is nondegenerate near a.
    """
    a, b = reduced.a, reduced.b
    r = reduced.r
    integrand = reduced.frak_b.inv()
    times = np.linspace(a, b, steps + 1)
    values = np.zeros((steps + 1, r, r))
    for i in range(steps):
        s, e = times[i], times[i + 1]
        values[i + 1] = values[i] + (e - s) / 6.0 * (integrand(s) + 4.0 * integrand(0.5 * (s + e)) + integrand(e))
    path = BIntegralPath(times=times, values=values, integrand=integrand)
    if r == 0:
        return path

    scale = max(_scale(integrand(t)) for t in times[:: max(1, steps // 64)])
    threshold = kernel_tol * scale
    measures = np.array([_g_measures(path, a, t) for t in times[1:]])
    dets, sigmas = measures[:, 0], measures[:, 1]
    nodes = times[1:]
    last = len(nodes) - 1
    xtol = 1e-10 * (b - a)

    candidates = []
    sign_intervals = set()
    for i in range(last):
        if sigmas[i] <= threshold or sigmas[i + 1] <= threshold:
            continue
        if dets[i] * dets[i + 1] < 0.0:
            root = brentq(lambda t: _g_measures(path, a, t)[0], nodes[i], nodes[i + 1], xtol=xtol)
            candidates.append(root)
            sign_intervals.add(i)
    for i in range(1, last):
        local_min = sigmas[i] < sigmas[i - 1] and sigmas[i] <= sigmas[i + 1]
        if sigmas[i] <= threshold or (local_min and sigmas[i] <= DIP_CUTOFF * scale):
            if (i - 1) in sign_intervals or i in sign_intervals:
                continue
            result = minimize_scalar(
                lambda t: _g_measures(path, a, t)[1],
                bounds=(nodes[i - 1], nodes[i + 1]),
                method="bounded",
                options={"xatol": xtol},
            )
            if result.fun <= threshold:
                candidates.append(float(result.x))

    instants = []
    for t in sorted(candidates):
        if instants and t - instants[-1].t < 10 * xtol:
            continue
        s = np.linalg.svd(path.at(t) / (t - a), compute_uv=False)
        instants.append(DegeneracyInstant(t=float(t), multiplicity=max(1, int(np.sum(s <= threshold)))))
    path.instants = instants
    path.endpoint_degenerate = bool(sigmas[last] <= threshold)
    if path.endpoint_degenerate:
        logger.warning(f"B^int is degenerate at t=b={b:.12g}; t=b is conjugate for X~_red")
    logger.debug(f"B^int has {len(instants)} interior degeneracy instant(s)")
    return path


def reduced_maslov_shortcut(
    reduced: ReducedCoefficients,
    bpath: BIntegralPath,
    kernel_tol: float = KERNEL_TOL,
    inertia_tol: float = INERTIA_TOL,
) -> int:
    """Sum over degeneracy instants of sgn(frak B(t)) on the frak B(t)-orthogonal complement of Im B^int(t)."""
    if bpath.endpoint_degenerate:
        raise ReductionError("t=b is a degeneracy instant of B^int; the shortcut is undefined")
    a = reduced.a
    scale = max(_scale(bpath.integrand(t)) for t in bpath.times[:: max(1, len(bpath.times) // 64)])
    total = 0
    for inst in bpath.instants:
        u, s, _ = np.linalg.svd(bpath.at(inst.t) / (inst.t - a))
        image = Subspace(u[:, : int(np.sum(s > kernel_tol * scale))])
        form = SymForm(reduced.frak_b(inst.t))
        if inertia(restrict(form, image), inertia_tol)[2]:
            raise ReductionError(f"frak B is degenerate on Im B^int at t={inst.t:.12g}; shortcut proviso fails")
        signature, nondegenerate = signature_on_complement(form, image, inertia_tol)
        if not nondegenerate:
            raise ReductionError(f"degenerate complement at t={inst.t:.12g}; shortcut proviso fails")
        total += signature
    logger.info(f"Reduced Maslov shortcut: {total} from {len(bpath.instants)} instant(s)")
    return total


def along_distribution_residual(X: CoefficientPath, frame: Frame, v: MatrixFunction, points: int = 400) -> float:
    """
    max_t |F(v)(t) - F(v)(a)| with
    F(v)(t)_i = alpha_v(t) Y_i(t) - int_a^t B(alpha_v, alpha_{Y_i}) + C(v, Y_i) ds.

    Zero exactly when v is a solution of X along D.
    """
    Y = frame.Y
    alpha_v = alpha_of(X, v)
    alpha_y = alpha_of(X, Y)

    def integrand(t: float) -> np.ndarray:
        av, vv = np.ravel(alpha_v(t)), np.ravel(v(t))
        return alpha_y(t).T @ X.B(t) @ av + Y(t).T @ X.C(t) @ vv

    def boundary(t: float) -> np.ndarray:
        return Y(t).T @ np.ravel(alpha_v(t))

    times = np.linspace(X.a, X.b, points + 1)
    accumulated = np.zeros(frame.rank)
    f0 = boundary(X.a)
    worst, scale = 0.0, _scale(f0)
    for s, e in zip(times[:-1], times[1:]):
        accumulated = accumulated + (e - s) / 6.0 * (integrand(s) + 4.0 * integrand(0.5 * (s + e)) + integrand(e))
        value = boundary(e) - accumulated
        scale = max(scale, _scale(boundary(e)))
        worst = max(worst, float(np.max(np.abs(value - f0), initial=0.0)))
    return worst / scale


def lift(frame: Frame, f: MatrixFunction) -> MatrixFunction:
    """lambda(f) = sum_i f_i Y_i."""
    column = f if len(f.shape) == 2 else MatrixFunction(lambda t: f(t).reshape(-1, 1), (f.shape[0], 1), step=f.step)
    return frame.Y @ column
