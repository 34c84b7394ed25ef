"""
Index Form Discretization
=====================================
Piecewise-linear finite elements for the index form

    I(v, w) = int_a^b B(alpha_v, alpha_w) + C(v, w) dt - S(v(a), w(a))

on H = {v : v(a) in P, v(b) = 0}, and numerical checks of the index theorems
built on it.

How it works:
1. Values and derivatives of the hat basis at the Gauss points are sparse
   sampling operators; the form is assembled once from them.
2. S_D is sampled directly: lambda(phi_j e_i) = phi_j Y_i with
   derivative phi_j' Y_i + phi_j Y_i'.
3. K_D is the joint kernel of the differenced operator F: F(v) is sampled at
   the element midpoints, where the element derivative gives alpha_v, and
   adjacent samples are differenced with the integral term by Gauss
   quadrature on the two half elements between them. Dependent functionals
   are filtered by SVD. The same functionals on S_D give F o lambda.
4. Integer inertias are gated on stabilization across mesh refinements;
   vanishing continuum eigenvalues are detected by Richardson extrapolation
   over three nested meshes.
"""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.linalg import eigh, eigvalsh, svd

from app.core.config import DEFAULT_MESHES, INERTIA_TOL, QUAD_ORDER, RANK_TOL
from app.core.errors import SymplecticError
from app.models.fe import (
    AdditivityReport,
    AssembledForm,
    ConstraintSet,
    DecompositionReport,
    FeSpace,
    IndexTheoremReport,
    KernelReport,
    MeshRecord,
    OldIndexReport,
    Sampled,
)
from app.models.focal import FocalOptions
from app.models.forms import SymForm
from app.models.matrix_function import MatrixFunction
from app.models.reduction import Frame
from app.models.system import CoefficientPath, InitialData
from app.services.bilinear import inertia
from app.services.maslov import EndpointFocalError, endpoint_multiplicity, maslov_index
from app.services.reduction import build_reduced, reduced_coefficients
from app.services.sds import coefficient_index, initial_condition_index

logger = logging.getLogger(__name__)

MIN_INTERVALS = 8
DECOMPOSITION_TOL = 1e-8


class IndexFormError(SymplecticError):
    pass


class IndexTheoremPreconditionError(IndexFormError):
    pass


# --------------------------------------------------
# assembly
# --------------------------------------------------

def make_space(X: CoefficientPath, ell0: InitialData, mesh: Union[int, Sequence[float]],
               quad_order: int = QUAD_ORDER) -> FeSpace:
    nodes = np.linspace(X.a, X.b, int(mesh) + 1) if np.isscalar(mesh) else np.asarray(mesh, dtype=float)
    if len(nodes) - 1 < MIN_INTERVALS:
        raise IndexFormError(f"at least {MIN_INTERVALS} mesh intervals are required, got {len(nodes) - 1}")
    if ell0.n != X.n:
        raise IndexFormError(f"initial data lives in R^{ell0.n}, system in R^{X.n}")
    x, w = leggauss(quad_order)
    left, h = nodes[:-1, None], np.diff(nodes)[:, None]
    points = left + 0.5 * (x[None, :] + 1.0) * h
    weights = 0.5 * w[None, :] * h
    return FeSpace(nodes=nodes, n=X.n, P=ell0.P, points=points, weights=weights)


def _gauss_layout(space: FeSpace):
    """(element, local coordinate) of every Gauss point, element-major."""
    local = 0.5 * (leggauss(space.quad_order)[0] + 1.0)
    return np.repeat(np.arange(space.N), len(local)), np.tile(local, space.N)


def _sampling_operators(space: FeSpace, elements=None, local=None):
    """Sparse maps DOFs -> values and derivatives at points given by (element, local coordinate)."""
    if elements is None:
        elements, local = _gauss_layout(space)
    n, k, N = space.n, space.k, space.N
    pm = space.P.basis
    rows, cols, vals, ders = [], [], [], []

    def put(row, col, value, derivative):
        rows.append(row)
        cols.append(col)
        vals.append(value)
        ders.append(derivative)

    for point, (e, s) in enumerate(zip(elements, local)):
        h = space.nodes[e + 1] - space.nodes[e]
        base = point * n
        for c in range(n):
            if e == 0:
                for l in range(k):
                    put(base + c, l, pm[c, l] * (1.0 - s), -pm[c, l] / h)
            else:
                put(base + c, space.interior_index(e, c), 1.0 - s, -1.0 / h)
            if e + 1 < N:
                put(base + c, space.interior_index(e + 1, c), s, 1.0 / h)

    shape = (len(elements) * n, space.ndof)
    value_op = sparse.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    derivative_op = sparse.coo_matrix((ders, (rows, cols)), shape=shape).tocsr()
    return value_op, derivative_op


def assemble_index_form(
    X: CoefficientPath,
    ell0: InitialData,
    mesh: Union[int, Sequence[float]],
    quad_order: int = QUAD_ORDER,
) -> AssembledForm:
    space = make_space(X, ell0, mesh, quad_order)
    value_op, derivative_op = _sampling_operators(space)
    points, weights = space.flat_points, space.flat_weights

    weight_b = sparse.block_diag([w * X.b_inverse(t) for t, w in zip(points, weights)], format="csr")
    weight_c = sparse.block_diag([w * X.C(t) for t, w in zip(points, weights)], format="csr")
    drift = sparse.block_diag([X.A(t) for t in points], format="csr")

    form = AssembledForm(
        space=space,
        matrix=np.zeros((space.ndof, space.ndof)),
        value_op=value_op,
        derivative_op=derivative_op,
        weight_b=weight_b,
        weight_c=weight_c,
        drift=drift,
        boundary=ell0.S,
    )
    dofs = form.dofs()
    matrix = form.cross(dofs, dofs)
    form.matrix = 0.5 * (matrix + matrix.T)
    logger.debug(f"Assembled index form: N={space.N}, {space.ndof} DOFs, quad order {quad_order}")
    return form


def h1_gram(form: AssembledForm) -> np.ndarray:
    """int v'^T w' dt on the FE space."""
    space = form.space
    weights = sparse.diags(np.repeat(space.flat_weights, space.n))
    gram = form.derivative_op.T @ weights @ form.derivative_op
    return gram.toarray()


# --------------------------------------------------
# S_D and K_D
# --------------------------------------------------

def _section_samples(frame: Frame, space: FeSpace, elements, local) -> Sampled:
    """lambda(phi_j e_i) = phi_j Y_i at (element, local coordinate) points, column (j-1) r + i."""
    n, r, N = space.n, frame.rank, space.N
    if frame.n != n:
        raise IndexFormError(f"frame lives in R^{frame.n}, FE space in R^{n}")
    dY = frame.Y.derivative(step=frame.Y.step)
    rows, cols, vals, ders = [], [], [], []

    for point, (e, s) in enumerate(zip(elements, local)):
        h = space.nodes[e + 1] - space.nodes[e]
        t = space.nodes[e] + s * h
        y, dy = frame.Y(t), dY(t)
        base = point * n
        # hat of node e on its right half, hat of node e + 1 on its left half
        for j, phi, dphi in ((e, 1.0 - s, -1.0 / h), (e + 1, s, 1.0 / h)):
            if not 1 <= j <= N - 1:
                continue
            for i in range(r):
                col = (j - 1) * r + i
                for c in range(n):
                    rows.append(base + c)
                    cols.append(col)
                    vals.append(phi * y[c, i])
                    ders.append(dphi * y[c, i] + phi * dy[c, i])

    shape = (len(elements) * n, r * (N - 1))
    return Sampled(
        sparse.coo_matrix((vals, (rows, cols)), shape=shape).tocsr(),
        sparse.coo_matrix((ders, (rows, cols)), shape=shape).tocsr(),
        np.zeros((space.k, shape[1])),
    )


def sd_basis(frame: Frame, space: FeSpace) -> Sampled:
    """Images lambda(phi_j e_i) of the interior hats at the Gauss points, column (j-1) r + i."""
    return _section_samples(frame, space, *_gauss_layout(space))


def _f_layout(space: FeSpace):
    """
    Points where F is evaluated: the N element midpoints, then for each interior
    node t_j the Gauss points of [m_{j-1}, t_j] and of [t_j, m_j].
    Returns (elements, local coordinates, quadrature weights); midpoints carry weight 0.
    """
    N, q = space.N, space.quad_order
    x, w = leggauss(q)
    h = np.diff(space.nodes)
    elements = [np.arange(N)]
    local = [np.full(N, 0.5)]
    weights = [np.zeros(N)]
    for e in range(N - 1):
        elements += [np.full(q, e), np.full(q, e + 1)]
        local += [0.5 + 0.25 * (x + 1.0), 0.25 * (x + 1.0)]
        weights += [0.25 * h[e] * w, 0.25 * h[e + 1] * w]
    return np.concatenate(elements), np.concatenate(local), np.concatenate(weights)


def _f_functionals(X: CoefficientPath, frame: Frame, space: FeSpace, elements, local, weights):
    """
    Sparse (G_value, G_derivative) with rows (j-1) r + i realizing

        F(v)(m_j)_i - F(v)(m_{j-1})_i
          = alpha_v Y_i |_{m_{j-1}}^{m_j} - int_{m_{j-1}}^{m_j} B(alpha_v, alpha_{Y_i}) + C(v, Y_i) ds

    on samples of (v, v') at the F points; alpha_v = B^-1 (v' - A v) is the
    one-sided element derivative at each midpoint.
    """
    n, r, N, q = space.n, frame.rank, space.N, space.quad_order
    dY = frame.Y.derivative(step=frame.Y.step)
    times = space.nodes[elements] + local * (space.nodes[elements + 1] - space.nodes[elements])
    rows, cols, on_values, on_derivatives = [], [], [], []

    def put(row, point, value_cov, derivative_cov):
        for c in range(n):
            rows.append(row)
            cols.append(point * n + c)
            on_values.append(value_cov[c])
            on_derivatives.append(derivative_cov[c])

    cache = {}

    def coefficients(point):
        if point not in cache:
            t = times[point]
            a, b_inv, y = X.A(t), X.b_inverse(t), frame.Y(t)
            pairing = b_inv @ y                      # alpha_v(Y) = pairing^T (v' - A v)
            flux = b_inv @ (dY(t) - a @ y)           # B(alpha_v, alpha_Y) = flux^T (v' - A v)
            cache[point] = (a, pairing, flux, X.C(t) @ y)
        return cache[point]

    for j in range(1, N):
        for i in range(r):
            row = (j - 1) * r + i
            for point, sign in ((j, 1.0), (j - 1, -1.0)):
                a, pairing, _, _ = coefficients(point)
                put(row, point, -sign * (a.T @ pairing[:, i]), sign * pairing[:, i])
            first = N + (j - 1) * 2 * q
            for point in range(first, first + 2 * q):
                a, _, flux, c_y = coefficients(point)
                w = weights[point]
                put(row, point, -w * (c_y[:, i] - a.T @ flux[:, i]), -w * flux[:, i])

    shape = (r * (N - 1), len(elements) * n)
    g_value = sparse.coo_matrix((on_values, (rows, cols)), shape=shape).tocsr()
    g_derivative = sparse.coo_matrix((on_derivatives, (rows, cols)), shape=shape).tocsr()
    return g_value, g_derivative, times


def _null_space(rows: np.ndarray, rank_tol: float):
    """(kernel basis, singular values, rank) with rank decided relative to sigma_max."""
    width = rows.shape[1]
    if rows.shape[0] == 0:
        return np.eye(width), np.zeros(0), 0
    _, s, vh = svd(rows)
    rank = int(np.sum(s > rank_tol * max(s[0], 1.0))) if s.size else 0
    return vh[rank:].T, s, rank


def kd_constraints(
    X: CoefficientPath,
    frame: Frame,
    mesh: Union[int, Sequence[float], FeSpace],
    ell0: Optional[InitialData] = None,
    quad_order: int = QUAD_ORDER,
    rank_tol: float = RANK_TOL,
) -> ConstraintSet:
    """
    Differenced F functionals on the FE space; their joint kernel is the
    discrete K_D. `mesh` may be an interval count, the node array, or an
    existing FeSpace (whose P is used); otherwise P comes from `ell0` (L0 by default).
    """
    if isinstance(mesh, FeSpace):
        space = mesh
    else:
        space = make_space(X, ell0 or InitialData.lagrangian_zero(X.n), mesh, quad_order)
    layout = _f_layout(space)
    g_value, g_derivative, times = _f_functionals(X, frame, space, *layout)

    value_op, derivative_op = _sampling_operators(space, layout[0], layout[1])
    rows = (g_value @ value_op + g_derivative @ derivative_op).toarray()
    lifted = _section_samples(frame, space, layout[0], layout[1])
    f_lambda = (g_value @ lifted.values + g_derivative @ lifted.derivatives).toarray()

    kernel, s, rank = _null_space(rows, rank_tol)
    if rank < rows.shape[0]:
        logger.debug(f"Dropped {rows.shape[0] - rank} dependent K_D functional(s) at N={space.N}")
    return ConstraintSet(
        rows=rows,
        singular_values=s,
        rank=rank,
        kernel=kernel,
        sections=sd_basis(frame, space),
        f_lambda=f_lambda,
        g_value=g_value,
        g_derivative=g_derivative,
        points=times,
    )


def restricted_form(form: AssembledForm, target: Union[ConstraintSet, Sampled, np.ndarray]) -> SymForm:
    if isinstance(target, ConstraintSet):
        basis = target.kernel
        return SymForm(basis.T @ form.matrix @ basis, scale=form.scale)
    if isinstance(target, Sampled):
        return SymForm(form.cross(target, target), scale=form.scale)
    basis = np.asarray(target)
    return SymForm(basis.T @ form.matrix @ basis, scale=form.scale)


def restricted_inertia(
    form: AssembledForm,
    target: Union[ConstraintSet, Sampled, np.ndarray],
    tol: float = INERTIA_TOL,
):
    """(n_minus, n_plus, degeneracy) of I on K_D (a ConstraintSet), on sampled sections, or on a DOF basis."""
    return inertia(restricted_form(form, target), tol)


def _orthogonality(form: AssembledForm, constraints: ConstraintSet) -> float:
    """Spectral norm of I(K_D basis, S_D basis) relative to the largest entries of I on H and on S_D."""
    if constraints.kernel.shape[1] == 0 or constraints.sections.m == 0:
        return 0.0
    kd = form.dofs().combine(constraints.kernel)
    values = form.cross(kd, constraints.sections)
    sd_scale = float(np.max(np.abs(form.cross(constraints.sections, constraints.sections))))
    return float(np.linalg.norm(values, 2)) / max(form.scale, sd_scale, 1.0)


# --------------------------------------------------
# spectral helpers
# --------------------------------------------------

def _richardson(values: Sequence[float]) -> float:
    """Eliminate the h^2 and h^4 terms from values on meshes N, 2N, 4N."""
    coarse = (4.0 * values[1] - values[0]) / 3.0
    fine = (4.0 * values[2] - values[1]) / 3.0
    return (16.0 * fine - coarse) / 15.0


def _track(spectra: List[np.ndarray], count: int) -> List[List[float]]:
    """Follow the `count` smallest |mu| of the finest spectrum back to the coarser ones."""
    finest = spectra[-1]
    chosen = np.argsort(np.abs(finest))[:count]
    tracks = []
    used = [set() for _ in spectra[:-1]]
    for idx in chosen:
        target = finest[idx]
        track = []
        for level, spectrum in enumerate(spectra[:-1]):
            order = np.argsort(np.abs(spectrum - target))
            pick = next(int(i) for i in order if int(i) not in used[level])
            used[level].add(pick)
            track.append(float(spectrum[pick]))
        track.append(float(target))
        tracks.append(track)
    return tracks


def _nested(mesh: int) -> List[int]:
    return [mesh, 2 * mesh, 4 * mesh]


# --------------------------------------------------
# verifications
# --------------------------------------------------

def _maslov_or_refuse(X: CoefficientPath, ell0: InitialData, opts: FocalOptions, what: str) -> int:
    try:
        report = maslov_index(X, ell0, opts)
    except EndpointFocalError as e:
        raise IndexTheoremPreconditionError(f"{what}: {e}") from e
    if not report.valid:
        raise IndexTheoremPreconditionError(f"{what}: degenerate focal instant, Maslov index undefined")
    return report.total


def verify_index_theorem(
    X: CoefficientPath,
    ell0: InitialData,
    frame: Frame,
    meshes: Optional[Sequence[int]] = None,
    opts: Optional[FocalOptions] = None,
    quad_order: int = QUAD_ORDER,
) -> IndexTheoremReport:
    meshes = list(meshes or DEFAULT_MESHES)
    opts = opts or FocalOptions()
    reduced = reduced_coefficients(X, frame)
    index_x = coefficient_index(X)
    if reduced.index != index_x:
        raise IndexTheoremPreconditionError(f"index of D is {reduced.index} but the index of X is {index_x}")

    maslov = _maslov_or_refuse(X, ell0, opts, "endpoint focal for (X, l0)")
    maslov_red = 0
    if frame.rank:
        X_red = build_reduced(X, frame, reduced)
        maslov_red = _maslov_or_refuse(X_red, InitialData.lagrangian_zero(frame.rank), opts,
                                       "t=b conjugate for the reduced system")
    correction = initial_condition_index(X, ell0, opts.inertia_tol)[0]
    rhs_terms = {"maslov": maslov, "maslov_red": maslov_red, "correction": correction}

    records: List[MeshRecord] = []
    residuals = {}
    lhs, stabilized_at = None, None
    for N in meshes:
        form = assemble_index_form(X, ell0, N, quad_order)
        constraints = kd_constraints(X, frame, form.space, rank_tol=opts.rank_tol)
        restricted = restricted_form(form, constraints)
        n_minus, n_plus, degeneracy = inertia(restricted, opts.inertia_tol)
        eigenvalues = eigvalsh(restricted.entries) if restricted.dim else np.zeros(0)
        smallest = sorted(np.abs(eigenvalues))[:3]
        records.append(MeshRecord(N, n_minus, n_plus, degeneracy, [float(v) for v in smallest]))
        residuals = {"orthogonality": _orthogonality(form, constraints), "dropped_constraints": float(constraints.dropped)}
        logger.debug(f"N={N}: n_minus(I|K_D)={n_minus}, degeneracy {degeneracy}")
        if len(records) > 1:
            previous = records[-2]
            if degeneracy == 0 and previous.degeneracy == 0 and previous.n_minus == n_minus:
                lhs, stabilized_at = n_minus, N
                break

    report = IndexTheoremReport(
        lhs=lhs,
        rhs_terms=rhs_terms,
        meshes=[record.N for record in records],
        residuals=residuals,
        verdict="inconclusive",
        stabilized_at=stabilized_at,
        eigenflow=records,
    )
    if lhs is None:
        logger.warning(f"n_minus(I|K_D) did not stabilize on meshes {meshes}")
    elif lhs == report.rhs:
        report.verdict = "holds"
    else:
        report.verdict = "violated"
        logger.warning(f"Index theorem mismatch: lhs={lhs}, rhs={report.rhs} ({rhs_terms})")
    logger.info(f"Index theorem for {X.label or 'system'}: lhs={lhs}, rhs={report.rhs}, {report.verdict}")
    return report


def verify_old_index_theorem(
    X: CoefficientPath,
    ell0: InitialData,
    frame: Frame,
    meshes: Optional[Sequence[int]] = None,
    opts: Optional[FocalOptions] = None,
    quad_order: int = QUAD_ORDER,
) -> OldIndexReport:
    """n_minus(I|K_Delta) - n_plus(I|S_Delta) - n_minus(B(a)^-1|P) = maslov for a maximal negative Delta."""
    meshes = list(meshes or DEFAULT_MESHES)
    opts = opts or FocalOptions()
    reduced = reduced_coefficients(X, frame)
    index_x = coefficient_index(X)
    if not reduced.index == frame.rank == index_x:
        raise IndexTheoremPreconditionError(
            f"frame of rank {frame.rank} with index {reduced.index} is not maximal negative for index {index_x}"
        )
    maslov = _maslov_or_refuse(X, ell0, opts, "endpoint focal for (X, l0)")
    correction = initial_condition_index(X, ell0, opts.inertia_tol)[0]

    seen, previous = [], None
    n_k = n_s = None
    for N in meshes:
        form = assemble_index_form(X, ell0, N, quad_order)
        constraints = kd_constraints(X, frame, form.space, rank_tol=opts.rank_tol)
        k_minus, _, k_deg = restricted_inertia(form, constraints, opts.inertia_tol)
        _, s_plus, s_deg = restricted_inertia(form, constraints.sections, opts.inertia_tol)
        seen.append(N)
        current = (k_minus, s_plus) if k_deg == 0 and s_deg == 0 else None
        if current is not None and current == previous:
            n_k, n_s = current
            break
        previous = current

    report = OldIndexReport(n_k, n_s, correction, maslov, seen, "inconclusive")
    if report.lhs is not None:
        report.verdict = "holds" if report.lhs == maslov else "violated"
    logger.info(f"Old index theorem: lhs={report.lhs}, maslov={maslov}, {report.verdict}")
    return report


def verify_orthogonality(X: CoefficientPath, ell0: InitialData, frame: Frame, mesh: int,
                         rank_tol: float = RANK_TOL) -> float:
    """Size of I(K_D, S_D) relative to the form scale; zero in the continuum for any frame."""
    form = assemble_index_form(X, ell0, mesh)
    return _orthogonality(form, kd_constraints(X, frame, form.space, rank_tol=rank_tol))


def reduced_form_carry(X: CoefficientPath, frame: Frame, mesh: int, quad_order: int = QUAD_ORDER) -> float:
    """max |I(lambda f, lambda g) - I_red(f, g)| over hats f, g, relative to max |I_red|."""
    if frame.rank == 0:
        return 0.0
    form = assemble_index_form(X, InitialData.lagrangian_zero(X.n), mesh, quad_order)
    sections = sd_basis(frame, form.space)
    lifted = form.cross(sections, sections)
    X_red = build_reduced(X, frame)
    red = assemble_index_form(X_red, InitialData.lagrangian_zero(frame.rank), mesh, quad_order)
    scale = max(1.0, float(np.max(np.abs(red.matrix))))
    return float(np.max(np.abs(lifted - red.matrix))) / scale


def verify_decomposition(
    X: CoefficientPath,
    ell0: InitialData,
    frame: Frame,
    mesh: int,
    opts: Optional[FocalOptions] = None,
    quad_order: int = QUAD_ORDER,
) -> DecompositionReport:
    """
    Invertibility of the discretized F o lambda. The matrix is h times a
    second-order difference operator on the reduced hats, so sigma_min / h is
    followed over nested meshes and extrapolated to h -> 0.
    """
    opts = opts or FocalOptions()
    if frame.rank == 0:
        return DecompositionReport([mesh], [], None, None, 1.0, True, False)

    meshes = _nested(mesh)
    spectra, condition = [], None
    for N in meshes:
        space = make_space(X, ell0, N, quad_order)
        f_lambda = kd_constraints(X, frame, space, rank_tol=opts.rank_tol).f_lambda
        singular = svd(f_lambda, compute_uv=False)
        spectra.append(singular * N / X.length)
        condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")

    track = _track(spectra, 1)[0]
    extrapolated = _richardson(track)
    sigma = abs(extrapolated)
    decomposes = sigma > DECOMPOSITION_TOL

    X_red = build_reduced(X, frame)
    reduced_conjugate = endpoint_multiplicity(X_red, InitialData.lagrangian_zero(frame.rank), opts) > 0
    if decomposes == reduced_conjugate:
        logger.warning(
            f"Decomposition check disagrees with the reduced system: sigma={sigma:.3e}, reduced conjugate={reduced_conjugate}"
        )
    return DecompositionReport(meshes, track, extrapolated, sigma, condition, decomposes, reduced_conjugate)


def kernel_dimension_check(
    X: CoefficientPath,
    ell0: InitialData,
    frame: Frame,
    mesh: int,
    opts: Optional[FocalOptions] = None,
    quad_order: int = QUAD_ORDER,
) -> KernelReport:
    """Degeneracy of I|K_D (continuum limit) against the multiplicity of b as a focal instant."""
    opts = opts or FocalOptions()
    if frame.rank:
        X_red = build_reduced(X, frame)
        if endpoint_multiplicity(X_red, InitialData.lagrangian_zero(frame.rank), opts):
            raise IndexTheoremPreconditionError("t=b is conjugate for the reduced system")

    meshes = _nested(mesh)
    spectra = []
    for N in meshes:
        form = assemble_index_form(X, ell0, N, quad_order)
        basis = kd_constraints(X, frame, form.space, rank_tol=opts.rank_tol).kernel
        a = basis.T @ form.matrix @ basis
        g = basis.T @ h1_gram(form) @ basis
        spectra.append(eigh(0.5 * (a + a.T), 0.5 * (g + g.T), eigvals_only=True))

    count = min(X.n + 1, min(len(s) for s in spectra))
    candidates = [_richardson(track) for track in _track(spectra, count)]
    degeneracy = int(sum(abs(c) <= opts.kernel_tol for c in candidates))
    multiplicity = endpoint_multiplicity(X, ell0, opts)
    report = KernelReport(meshes, candidates, degeneracy, multiplicity)
    if not report.matches:
        logger.warning(f"Kernel of I|K_D has dimension {degeneracy}, focal multiplicity of b is {multiplicity}")
    return report


def verify_additivity(
    X: CoefficientPath,
    ell0: InitialData,
    frame: Frame,
    prefix: int,
    mesh: int,
    rank_tol: float = RANK_TOL,
    inertia_tol: float = INERTIA_TOL,
) -> AdditivityReport:
    """n_minus(I|K_Delta) = n_minus(I|K_D) + n_minus(I|lambda(K_Delta_red)) for Delta = Y_1..Y_prefix."""
    form = assemble_index_form(X, ell0, mesh)
    full = kd_constraints(X, frame, form.space, rank_tol=rank_tol)
    partial = kd_constraints(X, frame.prefix(prefix), form.space, rank_tol=rank_tol)
    k_d = restricted_inertia(form, full, inertia_tol)[0]
    k_delta = restricted_inertia(form, partial, inertia_tol)[0]

    # K_Delta_red lives in the reduced FE space, whose DOFs are the S_D coefficients
    r, N = frame.rank, form.space.N
    X_red = build_reduced(X, frame)
    delta_red = Frame(MatrixFunction.constant(np.eye(r)[:, :prefix]))
    reduced = kd_constraints(X_red, delta_red, form.space.nodes, quad_order=form.space.quad_order, rank_tol=rank_tol)
    gram = form.cross(full.sections, full.sections)
    gram = 0.5 * (gram + gram.T)
    kernel = reduced.kernel
    k_delta_red = inertia(SymForm(kernel.T @ gram @ kernel, scale=max(1.0, float(np.max(np.abs(gram))))), inertia_tol)[0]

    report = AdditivityReport(k_delta=k_delta, k_d=k_d, k_delta_red=k_delta_red, mesh=N)
    logger.info(f"Additivity: {k_delta} = {k_d} + {k_delta_red} -> {report.holds}")
    return report
