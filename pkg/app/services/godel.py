"""
Godel-type Manifolds
=====================================
Base-curve reduction on M0 x R^r with metric g0(x) + rho(x).

Along a base curve x(t) the fiber part of a geodesic is determined by
rho(x) u' = const, hence

    u(t) = u0 + B^int(t) B^int(b)^-1 (u1 - u0),   B^int(t) = int_a^t rho(x(s))^-1 ds

and the action reduces to

    E0(x) = 1/2 int g0(x', x') dt + 1/2 B^int(b)^-1 (u1 - u0, u1 - u0).

Features:
- Base curves: straight, piecewise linear (hat perturbations), sine modes
- Conservation residual of rho(x) u' and the lifted action for comparison
- Morse index of E0 from a finite-difference Hessian over hat coefficients
"""

import logging
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import sympy
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from app.core.config import INERTIA_TOL, KERNEL_TOL
from app.core.errors import SymplecticError
from app.models.forms import SymForm
from app.models.geometry import BaseCurve, FiberPath, ManifoldKind, ModelManifold
from app.services.bilinear import inertia

logger = logging.getLogger(__name__)

GAUSS_ORDER = 5
HESSIAN_STEP = 1e-4
HESSIAN_ELEMENTS = 24


class GodelError(SymplecticError):
    pass


_compiled: Dict[int, tuple] = {}


def godel_blocks(manifold: ModelManifold) -> Tuple[Callable, Callable]:
    """Compiled g0(x) and rho(x) over the base coordinates."""
    cached = _compiled.get(id(manifold))
    if cached is not None and cached[0] is manifold:
        return cached[1], cached[2]
    if manifold.kind != ManifoldKind.godel:
        raise GodelError(f"{manifold.kind.value} is not a Godel-type manifold")
    m = manifold.base_dim
    base = manifold.coordinates[:m]
    metric = sympy.Matrix(manifold.metric)
    g0 = sympy.lambdify(base, metric[:m, :m].tolist(), modules="numpy")
    rho = sympy.lambdify(base, metric[m:, m:].tolist(), modules="numpy")
    blocks = (lambda x: np.array(g0(*x), dtype=float)), (lambda x: np.array(rho(*x), dtype=float))
    _compiled[id(manifold)] = (manifold, *blocks)
    return blocks


# --------------------------------------------------
# base curves
# --------------------------------------------------

def straight_base(p0: Sequence[float], q0: Sequence[float], interval: Tuple[float, float], pieces: int = 64) -> BaseCurve:
    p0, q0 = np.asarray(p0, dtype=float), np.asarray(q0, dtype=float)
    a, b = interval
    slope = (q0 - p0) / (b - a)
    return BaseCurve(lambda t: p0 + (t - a) * slope, lambda t: slope, np.linspace(a, b, pieces + 1))


def hat_base(nodes: np.ndarray, values: np.ndarray) -> BaseCurve:
    """Piecewise linear curve through (nodes[j], values[j])."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float).reshape(len(nodes), -1)
    slopes = np.diff(values, axis=0) / np.diff(nodes)[:, None]

    def position(t):
        return np.array([np.interp(t, nodes, values[:, c]) for c in range(values.shape[1])])

    def velocity(t):
        i = min(max(int(np.searchsorted(nodes, t, side="right")) - 1, 0), len(slopes) - 1)
        return slopes[i]

    return BaseCurve(position, velocity, nodes)


def mode_base(p0: Sequence[float], q0: Sequence[float], interval: Tuple[float, float],
              amplitudes: np.ndarray, pieces: int = 64) -> BaseCurve:
    """Straight line plus sum_k A_k sin(k pi (t - a) / (b - a)); endpoints unchanged."""
    straight = straight_base(p0, q0, interval, pieces)
    a, b = interval
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    k = np.arange(1, amplitudes.shape[0] + 1)
    w = k * np.pi / (b - a)

    def position(t):
        return straight.position(t) + np.sin(w * (t - a)) @ amplitudes

    def velocity(t):
        return straight.velocity(t) + (w * np.cos(w * (t - a))) @ amplitudes

    return BaseCurve(position, velocity, straight.breakpoints)


def _integrate(fn: Callable[[float], np.ndarray], breakpoints: np.ndarray, upper: Optional[float] = None) -> np.ndarray:
    """Gauss-Legendre per segment of the breakpoints, truncated at `upper`."""
    x, w = leggauss(GAUSS_ORDER)
    total = None
    for s, e in zip(breakpoints[:-1], breakpoints[1:]):
        if upper is not None:
            if s >= upper:
                break
            e = min(e, upper)
        half = 0.5 * (e - s)
        for xi, wi in zip(x, w):
            term = wi * half * np.asarray(fn(s + half * (xi + 1.0)))
            total = term if total is None else total + term
    return total


# --------------------------------------------------
# fiber reconstruction and reduced action
# --------------------------------------------------

def fiber_integral(manifold: ModelManifold, base: BaseCurve, t: Optional[float] = None) -> np.ndarray:
    """B^int(t) = int_a^t rho(x(s))^-1 ds (t = b by default)."""
    _, rho = godel_blocks(manifold)
    r = manifold.fiber_dim
    if t is not None and t <= base.a:
        return np.zeros((r, r))
    return _integrate(lambda s: np.linalg.inv(rho(base.position(s))), base.breakpoints, t)


def _checked_total(manifold: ModelManifold, base: BaseCurve) -> np.ndarray:
    total = fiber_integral(manifold, base)
    s = np.linalg.svd(total, compute_uv=False)
    if s[-1] <= KERNEL_TOL * max(1.0, s[0]):
        raise GodelError(f"B^int(b) is degenerate (sigma_min={s[-1]:.3e}); no fiber path joins u0 to u1")
    return total


def godel_reconstruct_u(manifold: ModelManifold, base: BaseCurve, u0: Sequence[float], u1: Sequence[float]) -> FiberPath:
    u0, u1 = np.asarray(u0, dtype=float), np.asarray(u1, dtype=float)
    momentum = np.linalg.solve(_checked_total(manifold, base), u1 - u0)

    def position(t: float) -> np.ndarray:
        if t >= base.b:
            return u1.copy()
        return u0 + fiber_integral(manifold, base, t) @ momentum

    return FiberPath(position=position, momentum=momentum)


def _fiber_samples(manifold: ModelManifold, base: BaseCurve, fiber: FiberPath, u0: np.ndarray,
                   times: np.ndarray) -> np.ndarray:
    """u at increasing `times` by accumulating B^int over the refined segments."""
    _, rho = godel_blocks(manifold)
    inside = base.breakpoints[(base.breakpoints > times[0]) & (base.breakpoints < times[-1])]
    grid = np.union1d(times, inside)
    pieces = [_integrate(lambda s: np.linalg.inv(rho(base.position(s))), np.array([s, e]))
              for s, e in zip(grid[:-1], grid[1:])]
    cumulative = np.concatenate([np.zeros((1, *pieces[0].shape)), np.cumsum(pieces, axis=0)])
    picked = cumulative[np.searchsorted(grid, times)]
    return u0 + picked @ fiber.momentum


def fiber_conservation_residual(manifold: ModelManifold, base: BaseCurve, fiber: FiberPath, samples: int = 2001) -> float:
    """max |rho(x) u' - const| with u' from a spline of sampled u, relative to |const|."""
    _, rho = godel_blocks(manifold)
    times = np.linspace(base.a, base.b, samples)
    u = _fiber_samples(manifold, base, fiber, fiber.position(base.a), times)
    du = CubicSpline(times, u, axis=0).derivative()(times)
    conserved = np.array([rho(base.position(t)) @ d for t, d in zip(times, du)])
    scale = max(1.0, float(np.max(np.abs(fiber.momentum))))
    return float(np.max(np.abs(conserved - fiber.momentum))) / scale


def godel_E0(manifold: ModelManifold, base: BaseCurve, u0: Sequence[float], u1: Sequence[float]) -> float:
    g0, _ = godel_blocks(manifold)
    delta = np.asarray(u1, dtype=float) - np.asarray(u0, dtype=float)
    kinetic = _integrate(lambda t: base.velocity(t) @ g0(base.position(t)) @ base.velocity(t), base.breakpoints)
    total = _checked_total(manifold, base)
    return 0.5 * float(kinetic) + 0.5 * float(delta @ np.linalg.solve(total, delta))


def lifted_action(manifold: ModelManifold, base: BaseCurve, u0: Sequence[float], u1: Sequence[float],
                  samples: int = 2001) -> float:
    """E(z) = 1/2 int g(z', z') for z = (x, u) with u' taken from a spline of the reconstructed u."""
    g0, rho = godel_blocks(manifold)
    fiber = godel_reconstruct_u(manifold, base, u0, u1)
    times = np.linspace(base.a, base.b, samples)
    u = _fiber_samples(manifold, base, fiber, np.asarray(u0, dtype=float), times)
    du = CubicSpline(times, u, axis=0).derivative()

    def integrand(t: float) -> float:
        x, dx, d = base.position(t), base.velocity(t), du(t)
        return dx @ g0(x) @ dx + d @ rho(x) @ d

    breakpoints = np.union1d(base.breakpoints, times)
    return 0.5 * float(_integrate(integrand, breakpoints))


def hessian_index_E0(
    manifold: ModelManifold,
    center: BaseCurve,
    u0: Sequence[float],
    u1: Sequence[float],
    elements: int = HESSIAN_ELEMENTS,
    step: float = HESSIAN_STEP,
    tol: float = INERTIA_TOL,
) -> Tuple[int, int, int]:
    """
    Inertia of d^2 E0 at `center` over hat perturbations with fixed endpoints.

    Central second differences with steps h and h/2 are combined by Richardson
    extrapolation.
    """
    m = manifold.base_dim
    nodes = np.linspace(center.a, center.b, elements + 1)
    values = np.array([center.position(t) for t in nodes]).reshape(elements + 1, m)
    base_coeffs = values[1:-1].ravel()
    d = base_coeffs.size

    def energy(coeffs: np.ndarray) -> float:
        trial = values.copy()
        trial[1:-1] = coeffs.reshape(elements - 1, m)
        return godel_E0(manifold, hat_base(nodes, trial), u0, u1)

    def hessian(h: float) -> np.ndarray:
        H = np.zeros((d, d))
        eye = np.eye(d)
        for i in range(d):
            for j in range(i, d):
                plus, minus = h * (eye[i] + eye[j]), h * (eye[i] - eye[j])
                H[i, j] = H[j, i] = (
                    energy(base_coeffs + plus) - energy(base_coeffs + minus)
                    - energy(base_coeffs - minus) + energy(base_coeffs - plus)
                ) / (4.0 * h * h)
        return H

    H = (4.0 * hessian(0.5 * step) - hessian(step)) / 3.0
    result = inertia(SymForm(H), tol)
    logger.info(f"Hessian of E0 over {d} hat coefficients: inertia {result}")
    return result
