"""
Geodesics and Jacobi Systems
=====================================
Turns geodesics of model manifolds into Morse-Sturm systems and reduction frames.

How it works:
1. The geodesic equation is integrated together with a parallel frame E(t)
   (DOP853); E(a) is g-orthonormal, so g in the frame is a constant diag(+-1).
2. The Jacobi operator v -> R(x', v) x' is expressed in the frame and tabulated;
   the Morse-Sturm system is v'' = R_frame(t) v.
3. Killing fields Y_i become frame columns E^-1 Y_i(gamma) with derivative
   E^-1 nabla_{x'} Y_i; they are Jacobi fields along every geodesic.
4. Geodesics between two points are found by shooting from a grid of initial
   velocities refined with a hybrid Newton root finder.

Features:
- Second fundamental form of an initial submanifold in the geodesic direction
- Conservation check of g(x', Y_i) and the symbolic Killing check
- E = g(nabla_{Y_j} Y_i, x') and its covariant derivative for the constraint system
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import qr
from scipy.optimize import root

from app.core.config import DEFAULT_STEPS
from app.core.errors import SymplecticError
from app.models.fe import IndexTheoremReport
from app.models.focal import FocalOptions
from app.models.forms import SymForm, Subspace
from app.models.geometry import GeodesicCurve, GeodesicRecord, GeodesicSystem, ShootingResult
from app.models.reduction import BIntegralPath, Frame, ReducedCoefficients
from app.models.system import InitialData
from app.services.bilinear import inertia
from app.models.matrix_function import MatrixFunction
from app.services.expressions import parse_matrix
from app.services.indexform import verify_index_theorem
from app.services.manifolds import Geometry, NonKillingFieldError
from app.services.maslov import EndpointFocalError, endpoint_multiplicity, maslov_index
from app.services.reduction import b_integral, build_reduced, reduced_coefficients
from app.services.sds import make_morse_sturm

logger = logging.getLogger(__name__)

SAMPLES = 2001
RTOL = 1e-11
ATOL = 1e-12
FRAME_TOL = 1e-10
CONSERVATION_TOL = 1e-6
ENDPOINT_TOL = 1e-8
DEDUP_RADIUS = 1e-4


class GeodesicError(SymplecticError):
    pass


def orthonormal_frame(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """E with E^T g E = diag(signs); columns ordered by eigenvalue."""
    eigenvalues, q = np.linalg.eigh(0.5 * (g + g.T))
    signs = np.sign(eigenvalues)
    return q / np.sqrt(np.abs(eigenvalues)), signs


def _rhs(geometry: Geometry, with_frame: bool):
    n = geometry.n

    def rhs(t, y):
        x, v = y[:n], y[n:2 * n]
        gamma = geometry.christoffel(x)
        parts = [v, -np.einsum("abc,b,c->a", gamma, v, v)]
        if with_frame:
            E = y[2 * n:].reshape(n, n)
            parts.append(-np.einsum("abc,b,ci->ai", gamma, v, E).ravel())
        return np.concatenate(parts)

    return rhs


def trace_geodesic(
    geometry: Geometry,
    x0: Sequence[float],
    v0: Sequence[float],
    interval: Tuple[float, float],
    samples: int = SAMPLES,
    with_frame: bool = True,
) -> GeodesicCurve:
    n = geometry.n
    x0, v0 = np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    y0 = [x0, v0]
    signs = None
    if with_frame:
        E0, signs = orthonormal_frame(geometry.metric(x0))
        y0.append(E0.ravel())
    times = np.linspace(interval[0], interval[1], samples)
    sol = solve_ivp(_rhs(geometry, with_frame), interval, np.concatenate(y0), method="DOP853",
                    t_eval=times, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise GeodesicError(f"geodesic integration failed: {sol.message}")

    curve = GeodesicCurve(times=times, positions=sol.y[:n].T.copy(), velocities=sol.y[n:2 * n].T.copy())
    if with_frame:
        frames = sol.y[2 * n:].T.reshape(-1, n, n).copy()
        s = np.diag(signs)
        for i, (x, E) in enumerate(zip(curve.positions, frames)):
            delta = E.T @ geometry.metric(x) @ E - s
            drift = float(np.max(np.abs(delta)))
            if drift > FRAME_TOL:
                frames[i] = E @ (np.eye(n) - 0.5 * s @ delta)
                curve.frame_corrections.append({"t": float(times[i]), "drift": drift})
        if curve.frame_corrections:
            worst = max(c["drift"] for c in curve.frame_corrections)
            logger.warning(f"Re-orthonormalized the parallel frame at {len(curve.frame_corrections)} sample(s), worst drift {worst:.3e}")
        curve.frames = frames
    return curve


def jacobi_to_morse_sturm(geometry: Geometry, curve: GeodesicCurve) -> Tuple[SymForm, MatrixFunction]:
    """(g, R) with g = E^T g E constant and R(t) = E^-1 R(x', .) x' E, gR symmetrized."""
    if curve.frames is None:
        raise GeodesicError("the geodesic was traced without a parallel frame")
    n = geometry.n
    s = np.diag(np.round(np.diag(curve.frames[0].T @ geometry.metric(curve.positions[0]) @ curve.frames[0])))
    values = np.empty((len(curve.times), n, n))
    for i, (x, v, E) in enumerate(zip(curve.positions, curve.velocities, curve.frames)):
        r_frame = np.linalg.solve(E, geometry.jacobi_operator(x, v) @ E)
        gr = s @ r_frame
        values[i] = s @ (0.5 * (gr + gr.T))
    return SymForm(s), MatrixFunction.tabulated(curve.times, values, label="R")


def geodesic_system(geometry: Geometry, curve: GeodesicCurve, ell0: Optional[InitialData] = None,
                    label: str = "") -> GeodesicSystem:
    g, R = jacobi_to_morse_sturm(geometry, curve)
    X = make_morse_sturm(g, R, (curve.a, curve.b), label=label or f"{geometry.manifold.kind.value} geodesic")
    return GeodesicSystem(curve=curve, g=g, system=X, ell0=ell0 or InitialData.lagrangian_zero(geometry.n))


def submanifold_initial_data(
    geometry: Geometry,
    curve: GeodesicCurve,
    parametrization: Optional[Sequence[str]] = None,
    at: Sequence[float] = (),
    tol: float = 1e-8,
) -> InitialData:
    """
    (P, S) of an initial submanifold given by psi(p1..pk) with psi(at) = gamma(a).

    S is the second fundamental form in the direction gamma'(a) written in an
    orthonormal basis of P inside the parallel frame. A point gives L0.
    """
    n = geometry.n
    if not parametrization:
        return InitialData.lagrangian_zero(n)
    if curve.frames is None:
        raise GeodesicError("the geodesic was traced without a parallel frame")
    k = len(at)
    params = tuple(sympy.Symbol(f"p{i + 1}", real=True) for i in range(k))
    psi = sympy.Matrix(parse_matrix(list(parametrization), (n, 1), params))
    values = dict(zip(params, at))
    jac = np.array(psi.jacobian(sympy.Matrix(params)).subs(values).evalf(), dtype=float)
    hess = np.array([[list(sympy.diff(psi, params[i], params[j]).subs(values).evalf()) for j in range(k)]
                     for i in range(k)], dtype=float)
    x0 = np.array(psi.subs(values).evalf(), dtype=float).ravel()

    if np.max(np.abs(geometry.manifold.wrap(x0 - curve.positions[0]))) > tol:
        raise GeodesicError(f"submanifold point {list(x0)} differs from gamma(a) {list(curve.positions[0])}")
    g = geometry.metric(x0)
    v = curve.velocities[0]
    scale = max(1.0, float(np.max(np.abs(jac))) * float(np.max(np.abs(g @ v))))
    if np.max(np.abs(jac.T @ g @ v)) > tol * scale:
        raise GeodesicError("gamma'(a) is not orthogonal to the initial submanifold")
    if inertia(SymForm(jac.T @ g @ jac))[2]:
        raise GeodesicError("metric is degenerate on the tangent space of the initial submanifold")

    gamma = geometry.christoffel(x0)
    second = hess + np.einsum("abc,ib,jc->ija", gamma, jac.T, jac.T)
    ii_param = np.einsum("ija,ab,b->ij", second, g, v)
    u = np.linalg.solve(curve.frames[0], jac)
    pm, rq = qr(u, mode="economic")
    rq_inv = np.linalg.inv(rq)
    return InitialData(Subspace(pm), SymForm(rq_inv.T @ ii_param @ rq_inv))


# --------------------------------------------------
# reduction fields
# --------------------------------------------------

def killing_frame_data(
    geometry: Geometry,
    gsys: GeodesicSystem,
    field_specs: Sequence,
    steps: int = DEFAULT_STEPS,
) -> Tuple[Frame, ReducedCoefficients, BIntegralPath]:
    """Frame of Killing fields along the geodesic, its reduced coefficients and B^int."""
    fields = [geometry.field(entry) for entry in field_specs]
    commuting = geometry.check_killing(fields)
    compiled = [geometry.compile_field(Y) for Y in fields]
    curve = gsys.curve
    n, r = geometry.n, len(fields)
    times = curve.times

    values = np.empty((len(times), n, r))
    derivatives = np.empty((len(times), n, r))
    conserved = np.empty((len(times), r))
    for i, (x, v, E) in enumerate(zip(curve.positions, curve.velocities, curve.frames)):
        gamma, g = geometry.christoffel(x), geometry.metric(x)
        for j, (value, jacobian) in enumerate(compiled):
            y = value(x)
            covariant = jacobian(x) @ v + np.einsum("abc,b,c->a", gamma, v, y)
            values[i, :, j] = np.linalg.solve(E, y)
            derivatives[i, :, j] = np.linalg.solve(E, covariant)
            conserved[i, j] = y @ g @ v

    for j in range(r):
        spread = float(np.ptp(conserved[:, j])) / max(1.0, float(np.max(np.abs(conserved[:, j]))))
        if spread > CONSERVATION_TOL:
            raise NonKillingFieldError(f"g(gamma', Y_{j + 1}) varies by {spread:.3e} along the geodesic")

    spline = CubicSpline(times, values, axis=0)
    Y = MatrixFunction(
        spline,
        (n, r),
        derivative=lambda: MatrixFunction.tabulated(times, derivatives, label="Y'"),
        step=1e-5 * (times[-1] - times[0]),
        label="Y",
    )
    frame = Frame(Y, is_solution_frame=True, is_symmetric_frame=commuting)
    reduced = reduced_coefficients(gsys.system, frame)
    bpath = b_integral(reduced, steps)
    logger.debug(f"Killing frame of rank {r}: index {reduced.index}, {len(bpath.instants)} B^int degeneracy instant(s)")
    return frame, reduced, bpath


def constraint_system_check(
    geometry: Geometry,
    gsys: GeodesicSystem,
    field_specs: Sequence,
    frame: Frame,
    reduced: ReducedCoefficients,
    opts: Optional[FocalOptions] = None,
) -> Dict[str, object]:
    """
    Residuals of E' = E_bar, cal A = -E^T and cal C = -E_bar for Killing fields,
    plus admissibility (b not conjugate for the reduced system).
    """
    opts = opts or FocalOptions()
    fields = [geometry.field(entry) for entry in field_specs]
    r = len(fields)
    curve = gsys.curve
    times = curve.times
    nablas = [[geometry.compile_field(geometry.nabla(fields[j], fields[i])) for j in range(r)] for i in range(r)]

    e = np.empty((len(times), r, r))
    e_bar = np.empty((len(times), r, r))
    for k, (x, v) in enumerate(zip(curve.positions, curve.velocities)):
        g, gamma = geometry.metric(x), geometry.christoffel(x)
        for i in range(r):
            for j in range(r):
                value, jacobian = nablas[i][j]
                z = value(x)
                covariant = jacobian(x) @ v + np.einsum("abc,b,c->a", gamma, v, z)
                e[k, i, j] = z @ g @ v
                e_bar[k, i, j] = covariant @ g @ v

    e_prime = CubicSpline(times, e, axis=0).derivative()(times)
    scale = max(1.0, float(np.max(np.abs(e_bar))), float(np.max(np.abs(e))))
    frak_a = reduced.frak_a.sample(times)
    frak_c = reduced.frak_c.sample(times)
    interior = slice(2, -2)

    admissible = True
    if r:
        X_red = build_reduced(gsys.system, frame, reduced)
        admissible = endpoint_multiplicity(X_red, InitialData.lagrangian_zero(r), opts) == 0
    report = {
        "e_derivative_residual": float(np.max(np.abs(e_bar - e_prime)[interior])) / scale,
        "a_residual": float(np.max(np.abs(frak_a + np.transpose(e, (0, 2, 1))))) / scale,
        "c_residual": float(np.max(np.abs(frak_c + e_bar))) / scale,
        "admissible": admissible,
    }
    if not admissible:
        logger.warning("t=b is conjugate for the reduced system; the variational conclusions are not asserted")
    return report


# --------------------------------------------------
# shooting
# --------------------------------------------------

def _endpoint(geometry: Geometry, p: np.ndarray, v0: np.ndarray, interval: Tuple[float, float]) -> np.ndarray:
    sol = solve_ivp(_rhs(geometry, False), interval, np.concatenate([p, v0]), method="DOP853", rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise GeodesicError(sol.message)
    return sol.y[: geometry.n, -1]


def _seeds(geometry: Geometry, straight: np.ndarray, grid: Dict[str, Sequence[float]]) -> List[np.ndarray]:
    axes = [(geometry.manifold.index_of(name), list(values)) for name, values in sorted(grid.items())]
    seeds = []
    for combination in itertools.product(*[values for _, values in axes]):
        seed = straight.copy()
        for (index, _), value in zip(axes, combination):
            seed[index] = value
        seeds.append(seed)
    return seeds or [straight]


def shoot_geodesics(
    geometry: Geometry,
    p: Sequence[float],
    q: Sequence[float],
    interval: Tuple[float, float],
    grid: Optional[Dict[str, Sequence[float]]] = None,
    velocity_bound: float = np.inf,
    field_specs: Sequence = (),
    opts: Optional[FocalOptions] = None,
) -> ShootingResult:
    """All geodesics from p to q reachable from the seed grid, with Maslov and reduced Maslov indices."""
    opts = opts or FocalOptions()
    manifold = geometry.manifold
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    a, b = interval
    straight = manifold.wrap(q - p) / (b - a)
    seeds = _seeds(geometry, straight, grid or {})

    def mismatch(v0):
        return manifold.wrap(_endpoint(geometry, p, v0, interval) - q)

    found: List[Tuple[np.ndarray, float]] = []
    unresolved = 0
    for seed in seeds:
        try:
            solution = root(mismatch, seed, method="hybr", options={"xtol": 1e-12})
        except GeodesicError as e:
            logger.debug(f"Seed {list(seed)} failed: {e}")
            unresolved += 1
            continue
        residual = float(np.max(np.abs(mismatch(solution.x)))) if solution.success else np.inf
        if residual > ENDPOINT_TOL:
            logger.debug(f"Seed {list(seed)} unresolved (residual {residual:.3e})")
            unresolved += 1
            continue
        if all(np.linalg.norm(solution.x - v) > DEDUP_RADIUS for v, _ in found):
            found.append((solution.x, residual))

    rejected_bound = sum(1 for v, _ in found if np.linalg.norm(v) > velocity_bound)
    found = sorted(((v, res) for v, res in found if np.linalg.norm(v) <= velocity_bound), key=lambda item: tuple(item[0]))

    records, rejected_focal = [], 0
    for v0, residual in found:
        curve = trace_geodesic(geometry, p, v0, interval)
        curve.residual = residual
        gsys = geodesic_system(geometry, curve)
        try:
            report = maslov_index(gsys.system, gsys.ell0, opts)
            maslov_red = 0
            if field_specs:
                frame, reduced, _ = killing_frame_data(geometry, gsys, field_specs, opts.steps)
                X_red = build_reduced(gsys.system, frame, reduced)
                reduced_report = maslov_index(X_red, InitialData.lagrangian_zero(frame.rank), opts)
                maslov_red = reduced_report.total
        except EndpointFocalError:
            logger.info(f"Dropped geodesic with initial velocity {list(v0)}: endpoint focal")
            rejected_focal += 1
            continue
        if not report.valid or maslov_red is None:
            rejected_focal += 1
            continue
        records.append(GeodesicRecord(curve=curve, maslov=report.total, maslov_red=maslov_red))

    result = ShootingResult(records, len(seeds), unresolved, rejected_focal, rejected_bound)
    logger.info(
        f"Shooting found {len(records)} geodesic(s) from {len(seeds)} seed(s); "
        f"{unresolved} unresolved, {rejected_focal} focal, {rejected_bound} beyond the velocity bound"
    )
    return result


def stationary_index_check(
    geometry: Geometry,
    gsys: GeodesicSystem,
    field_specs: Sequence,
    meshes: Optional[Sequence[int]] = None,
    opts: Optional[FocalOptions] = None,
) -> Tuple[IndexTheoremReport, bool]:
    """n_minus(I|K_D) = maslov and reduced maslov = 0 for a stationary geodesic."""
    opts = opts or FocalOptions()
    frame, _, _ = killing_frame_data(geometry, gsys, field_specs, opts.steps)
    report = verify_index_theorem(gsys.system, gsys.ell0, frame, meshes, opts)
    consistent = report.lhs == report.rhs_terms["maslov"] and report.rhs_terms["maslov_red"] == 0
    if not consistent:
        logger.warning(f"Stationary index check failed: {report.as_dict()}")
    return report, consistent
