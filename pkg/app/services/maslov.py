"""
Focal Instants and Maslov Index
=====================================
Locates the instants where the V-block of l(t) = Phi(t) l0 loses rank and
sums their signatures.

How it works:
1. The 2n x n frame of l(t) is orthonormalized (QR) on a scan mesh finer than
   the integration mesh; det V / sqrt(det F^T F) and sigma_min of the
   orthonormal V-block are recorded.
2. Sign changes of the normalized determinant are refined with brentq.
3. Local minima of sigma_min (even multiplicity crossings, where det keeps
   its sign) are refined with bounded scalar minimization.
4. At each instant the multiplicity is dim ker V(t) and the signature is the
   signature of B(t)^-1 on the B(t)^-1-orthogonal complement of V[t].

Degenerate instants are reported but never summed; a focal endpoint t = b
is an error for the Maslov index.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from app.core.errors import SymplecticError
from app.models.focal import FocalInstant, FocalOptions, MaslovReport
from app.models.forms import SymForm, Subspace
from app.models.matrix_function import MatrixFunction
from app.models.system import CoefficientPath, FundamentalPath, InitialData, LagrangianPath
from app.services.bilinear import signature_on_complement
from app.services.sds import initial_condition_index, integrate_fundamental, lagrangian_frame

logger = logging.getLogger(__name__)

DIP_CUTOFF = 0.25


class MaslovError(SymplecticError):
    pass


class EndpointFocalError(MaslovError):
    pass


class UnresolvedClusterError(MaslovError):
    pass


class DegenerateInitialConditionError(MaslovError):
    pass


def _frame_measures(lpath: LagrangianPath, t: float) -> Tuple[float, float]:
    """(det V / sqrt(det F^T F), sigma_min of the orthonormalized V-block)."""
    frame = lpath.at(t)
    n = frame.shape[1]
    q, r = np.linalg.qr(frame)
    gram = abs(float(np.linalg.det(r)))
    det_v = float(np.linalg.det(frame[:n]))
    sigma = float(np.linalg.svd(q[:n], compute_uv=False)[-1])
    return det_v / gram, sigma


def _kernel_split(lpath: LagrangianPath, t: float, kernel_tol: float) -> Tuple[int, Subspace]:
    frame = lpath.at(t)
    n = frame.shape[1]
    q, _ = np.linalg.qr(frame)
    u, s, _ = np.linalg.svd(q[:n])
    multiplicity = int(np.sum(s <= kernel_tol))
    return multiplicity, Subspace(u[:, : n - multiplicity])


def _describe(X: CoefficientPath, lpath: LagrangianPath, t: float, opts: FocalOptions, forced: bool) -> Optional[FocalInstant]:
    multiplicity, image = _kernel_split(lpath, t, opts.kernel_tol)
    if multiplicity == 0:
        if not forced:
            return None
        # det changed sign across t, so V(t) is singular even if sigma_min sits above kernel_tol
        multiplicity, image = _kernel_split(lpath, t, max(opts.kernel_tol, _frame_measures(lpath, t)[1] * 1.5))
        multiplicity = max(multiplicity, 1)
    form = SymForm(X.b_inverse(t))
    signature, nondegenerate = signature_on_complement(form, image, opts.inertia_tol)
    return FocalInstant(t=float(t), multiplicity=multiplicity, signature=signature, nondegenerate=nondegenerate)


def _analyse(
    X: CoefficientPath,
    ell0: InitialData,
    opts: FocalOptions,
    path: Optional[FundamentalPath],
) -> Tuple[List[FocalInstant], float, list, List[str]]:
    if X.n == 0:
        return [], 0.0, [], []
    _, nondegenerate = initial_condition_index(X, ell0, opts.inertia_tol)
    if not nondegenerate:
        raise DegenerateInitialConditionError("B(a)^-1 is degenerate on P; the initial condition is degenerate")

    path = path or integrate_fundamental(X, opts.steps)
    lpath = lagrangian_frame(path, ell0)
    a, b = X.a, X.b
    length = b - a

    times = np.linspace(a, b, opts.scan_factor * (len(path.times) - 1) + 1)
    measures = np.array([_frame_measures(lpath, t) for t in times])
    dets, sigmas = measures[:, 0], measures[:, 1]
    trace = [(float(t), float(d), float(s)) for t, d, s in zip(times, dets, sigmas)]
    last = len(times) - 1
    warnings: List[str] = []

    above = np.nonzero(sigmas[1:] > opts.rank_tol)[0]
    if above.size == 0:
        raise MaslovError("the V-block stays singular on the whole scan mesh")
    start = int(above[0]) + 1
    epsilon = float(times[start] - a)

    hit = sigmas <= opts.rank_tol
    hit[:start] = False
    hit[last] = False

    det_fn = lambda t: _frame_measures(lpath, t)[0]
    sigma_fn = lambda t: _frame_measures(lpath, t)[1]
    xtol = 1e-12 * length

    roots: List[Tuple[float, bool]] = []
    sign_intervals = set()
    for i in range(start, last):
        if hit[i] or hit[i + 1]:
            continue
        if dets[i] * dets[i + 1] < 0.0:
            roots.append((brentq(det_fn, times[i], times[i + 1], xtol=xtol), True))
            sign_intervals.add(i)

    def refine_minimum(lo: int, hi: int) -> Optional[float]:
        result = minimize_scalar(sigma_fn, bounds=(times[lo], times[hi]), method="bounded", options={"xatol": xtol})
        return float(result.x) if result.fun <= opts.kernel_tol else None

    i = start
    while i < last:
        if hit[i]:
            j = i
            while j + 1 < last and hit[j + 1]:
                j += 1
            found = refine_minimum(max(i - 1, 0), min(j + 1, last))
            roots.append((found if found is not None else float(times[i]), False))
            i = j + 1
            continue
        if (
            i > start
            and sigmas[i] < sigmas[i - 1]
            and sigmas[i] <= sigmas[i + 1]
            and sigmas[i] <= DIP_CUTOFF
            and (i - 1) not in sign_intervals
            and i not in sign_intervals
        ):
            found = refine_minimum(i - 1, i + 1)
            if found is not None:
                roots.append((found, False))
        i += 1

    endpoint_focal = sigmas[last] <= opts.kernel_tol
    separation = opts.separation(length)

    instants: List[FocalInstant] = []
    for t, from_sign_change in sorted(roots):
        if endpoint_focal and b - t < separation:
            continue
        instant = _describe(X, lpath, t, opts, forced=from_sign_change)
        if instant is not None:
            instants.append(instant)

    if endpoint_focal:
        multiplicity, image = _kernel_split(lpath, b, opts.kernel_tol)
        signature, nondegenerate = signature_on_complement(SymForm(X.b_inverse(b)), image, opts.inertia_tol)
        instants.append(FocalInstant(t=float(b), multiplicity=max(multiplicity, 1), signature=signature, nondegenerate=nondegenerate))

    for first, second in zip(instants, instants[1:]):
        if second.t - first.t < separation:
            raise UnresolvedClusterError(
                f"focal instants at t={first.t:.12g} and t={second.t:.12g} are closer than {separation:.3g}; refine the mesh"
            )

    near_start = [inst.t for inst in instants if inst.t - a < 4.0 * (times[1] - times[0]) + epsilon]
    if near_start:
        warnings.append(f"focal instant(s) {near_start} adjacent to t=a; epsilon={epsilon:.3g} may misclassify them")
        logger.warning(warnings[-1])

    logger.debug(f"Found {len(instants)} focal instant(s) for {X.label or 'system'}")
    return instants, epsilon, trace, warnings


def find_focal_instants(
    X: CoefficientPath,
    ell0: InitialData,
    path: Optional[FundamentalPath] = None,
    opts: Optional[FocalOptions] = None,
) -> List[FocalInstant]:
    """All focal instants in ]a, b], the endpoint included when it is focal."""
    instants, _, _, _ = _analyse(X, ell0, opts or FocalOptions(), path)
    return instants


def maslov_index(
    X: CoefficientPath,
    ell0: InitialData,
    opts: Optional[FocalOptions] = None,
    path: Optional[FundamentalPath] = None,
) -> MaslovReport:
    opts = opts or FocalOptions()
    instants, epsilon, trace, warnings = _analyse(X, ell0, opts, path)

    if instants and instants[-1].t == X.b:
        raise EndpointFocalError(
            f"endpoint focal: t=b={X.b:.12g} is a focal instant of multiplicity {instants[-1].multiplicity}"
        )

    degenerate = [inst for inst in instants if not inst.nondegenerate]
    if degenerate:
        message = f"degenerate focal instant(s) at t={[inst.t for inst in degenerate]}; Maslov index not summed"
        logger.warning(message)
        return MaslovReport(instants, epsilon, None, False, trace, warnings + [message])

    total = sum(inst.signature for inst in instants)
    logger.info(f"Maslov index of {X.label or 'system'}: {total} from {len(instants)} instant(s)")
    return MaslovReport(instants, epsilon, total, True, trace, warnings)


def endpoint_multiplicity(X: CoefficientPath, ell0: InitialData, opts: Optional[FocalOptions] = None,
                          path: Optional[FundamentalPath] = None) -> int:
    """Multiplicity of t = b as a focal instant (0 when b is not focal)."""
    instants = find_focal_instants(X, ell0, path, opts)
    return instants[-1].multiplicity if instants and instants[-1].t == X.b else 0


def _shifted(X: CoefficientPath, dA: np.ndarray, dB: np.ndarray, dC: np.ndarray) -> CoefficientPath:
    return CoefficientPath(
        n=X.n,
        a=X.a,
        b=X.b,
        A=X.A + MatrixFunction.constant(dA),
        B=X.B + MatrixFunction.constant(dB),
        C=X.C + MatrixFunction.constant(dC),
        label=f"{X.label}+perturbation",
    )


def perturbation_stability(
    X: CoefficientPath,
    ell0: InitialData,
    delta: float,
    trials: int = 5,
    opts: Optional[FocalOptions] = None,
    seed: int = 0,
) -> bool:
    """True iff the Maslov index survives `trials` random constant perturbations of sup-norm <= delta."""
    opts = opts or FocalOptions()
    base = maslov_index(X, ell0, opts)
    if not base.valid:
        raise MaslovError("perturbation stability needs a valid Maslov index for the unperturbed system")

    rng = np.random.default_rng(seed)
    n = X.n
    failures = []
    for trial in range(trials):
        dA = rng.uniform(-delta, delta, (n, n))
        dB = rng.uniform(-delta, delta, (n, n))
        dC = rng.uniform(-delta, delta, (n, n))
        perturbed = _shifted(X, dA, 0.5 * (dB + dB.T), 0.5 * (dC + dC.T))
        try:
            report = maslov_index(perturbed, ell0, opts)
        except SymplecticError as e:
            failures.append(f"trial {trial}: {e}")
            continue
        if not report.valid:
            failures.append(f"trial {trial}: degenerate focal instant")
        elif report.total != base.total:
            failures.append(f"trial {trial}: index {report.total} != {base.total}")

    for failure in failures:
        logger.warning(f"Perturbation stability failure: {failure}")
    return not failures
