"""
Model Manifold Registry
=====================================
Built-in semi-Riemannian manifolds with closed-form connection and curvature.

Registry:
- flat: R^n with a constant diagonal metric of any signature
- sphere: round 2-sphere of radius R in (theta, phi)
- stationary_sphere: S^2 x (R^k, -ds^2), coordinates (theta, phi, s1..sk)
- godel: M0 x R^r with metric g0(x) + rho(x), coordinates (x1..xm, u1..ur)

Features:
- Christoffel symbols and the Riemann tensor derived symbolically with sympy
  and compiled to numpy callables
- Vector fields given by coordinate name or component expressions
- Symbolic Killing equation and commutator checks for reduction fields
"""

import logging
from typing import Callable, Dict, List, Sequence, Union

import numpy as np
import sympy

from app.core.errors import SymplecticError
from app.models.forms import SymForm
from app.models.geometry import ManifoldKind, ModelManifold
from app.services.bilinear import inertia
from app.services.expressions import ExpressionError, parse_matrix

logger = logging.getLogger(__name__)


class UnsupportedManifoldError(SymplecticError):
    pass


class NonKillingFieldError(SymplecticError):
    pass


def _symbols(names: Sequence[str]):
    return tuple(sympy.Symbol(name, real=True) for name in names)


def _signature(value) -> List[int]:
    if isinstance(value, str):
        value = [item for item in value.split(",") if item.strip()]
    signs = [int(float(v)) for v in value]
    if any(s not in (1, -1) for s in signs):
        raise UnsupportedManifoldError(f"signature entries must be +1 or -1, got {signs}")
    return signs


def flat(parameters: dict) -> ModelManifold:
    signs = _signature(parameters.get("signature", [1, 1]))
    coordinates = _symbols([f"x{i + 1}" for i in range(len(signs))])
    return ModelManifold(
        kind=ManifoldKind.flat,
        coordinates=coordinates,
        metric=sympy.ImmutableMatrix(sympy.diag(*signs)),
        parameters={"signature": signs},
    )


def sphere(parameters: dict) -> ModelManifold:
    radius = sympy.nsimplify(parameters.get("radius", 1))
    theta, phi = _symbols(["theta", "phi"])
    return ModelManifold(
        kind=ManifoldKind.sphere,
        coordinates=(theta, phi),
        metric=sympy.ImmutableMatrix(sympy.diag(radius**2, radius**2 * sympy.sin(theta) ** 2)),
        periods={1: 2 * np.pi},
        parameters={"radius": float(radius)},
    )


def stationary_sphere(parameters: dict) -> ModelManifold:
    radius = sympy.nsimplify(parameters.get("radius", 1))
    fibers = int(parameters.get("fibers", 1))
    if fibers < 1:
        raise UnsupportedManifoldError("stationary_sphere needs at least one negative flat factor")
    names = ["theta", "phi"] + [f"s{i + 1}" for i in range(fibers)]
    coordinates = _symbols(names)
    theta = coordinates[0]
    metric = sympy.diag(radius**2, radius**2 * sympy.sin(theta) ** 2, *([-1] * fibers))
    return ModelManifold(
        kind=ManifoldKind.stationary_sphere,
        coordinates=coordinates,
        metric=sympy.ImmutableMatrix(metric),
        periods={1: 2 * np.pi},
        parameters={"radius": float(radius), "fibers": fibers},
    )


def godel(parameters: dict) -> ModelManifold:
    m = int(parameters.get("base_dim", 1))
    r = int(parameters.get("fiber_dim", 1))
    if m < 1 or r < 1:
        raise UnsupportedManifoldError("godel needs base_dim >= 1 and fiber_dim >= 1")
    base = _symbols([f"x{i + 1}" for i in range(m)])
    fiber = _symbols([f"u{i + 1}" for i in range(r)])
    try:
        g0 = parse_matrix(parameters.get("base_metric", "1"), (m, m), base)
        rho = parse_matrix(parameters.get("rho", "-1"), (r, r), base)
    except ExpressionError as e:
        raise UnsupportedManifoldError(f"godel metric blocks: {e}")
    if sympy.simplify(rho - rho.T) != sympy.zeros(r, r) or sympy.simplify(g0 - g0.T) != sympy.zeros(m, m):
        raise UnsupportedManifoldError("godel metric blocks must be symmetric")
    return ModelManifold(
        kind=ManifoldKind.godel,
        coordinates=base + fiber,
        metric=sympy.ImmutableMatrix(sympy.diag(g0, rho)),
        base_dim=m,
        fiber_dim=r,
        parameters={"base_metric": str(parameters.get("base_metric", "1")), "rho": str(parameters.get("rho", "-1"))},
    )


REGISTRY: Dict[ManifoldKind, Callable[[dict], ModelManifold]] = {
    ManifoldKind.flat: flat,
    ManifoldKind.sphere: sphere,
    ManifoldKind.stationary_sphere: stationary_sphere,
    ManifoldKind.godel: godel,
}


def build_manifold(kind: Union[str, ManifoldKind], parameters: dict) -> ModelManifold:
    try:
        kind = ManifoldKind(kind)
    except ValueError:
        raise UnsupportedManifoldError(f"unknown manifold {kind!r}; registry has {[k.value for k in REGISTRY]}")
    manifold = REGISTRY[kind](dict(parameters or {}))
    logger.debug(f"Built {kind.value} manifold with coordinates {manifold.names}")
    return manifold


class Geometry:
    """Compiled metric, Christoffel symbols and curvature of a model manifold."""

    def __init__(self, manifold: ModelManifold):
        self.manifold = manifold
        x = manifold.coordinates
        n = manifold.dim
        g = sympy.Matrix(manifold.metric)
        g_inv = sympy.simplify(g.inv())

        gamma = [[[sympy.simplify(sum(
            sympy.Rational(1, 2) * g_inv[a, d] * (sympy.diff(g[d, c], x[b]) + sympy.diff(g[d, b], x[c]) - sympy.diff(g[b, c], x[d]))
            for d in range(n)))
            for c in range(n)] for b in range(n)] for a in range(n)]

        # R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}
        riemann = [[[[sympy.simplify(
            sympy.diff(gamma[a][d][b], x[c]) - sympy.diff(gamma[a][c][b], x[d])
            + sum(gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b] for e in range(n)))
            for d in range(n)] for c in range(n)] for b in range(n)] for a in range(n)]

        self.g_sym = g
        self.gamma_sym = gamma
        self.riemann_sym = riemann
        self._metric = sympy.lambdify(x, g.tolist(), modules="numpy")
        self._gamma = sympy.lambdify(x, gamma, modules="numpy")
        self._riemann = sympy.lambdify(x, riemann, modules="numpy")

    @property
    def n(self) -> int:
        return self.manifold.dim

    def metric(self, point) -> np.ndarray:
        return np.array(self._metric(*point), dtype=float)

    def christoffel(self, point) -> np.ndarray:
        return np.array(self._gamma(*point), dtype=float)

    def riemann(self, point) -> np.ndarray:
        return np.array(self._riemann(*point), dtype=float)

    def acceleration(self, point, velocity) -> np.ndarray:
        """x'' = -Gamma(x')(x') for geodesics."""
        return -np.einsum("abc,b,c->a", self.christoffel(point), velocity, velocity)

    def jacobi_operator(self, point, velocity) -> np.ndarray:
        """Matrix of v -> R(x', v) x'."""
        return np.einsum("abcd,b,c->ad", self.riemann(point), velocity, velocity)

    def check_metric(self, points) -> int:
        """Index of the metric, required constant over `points`."""
        index = None
        for point in points:
            n_minus, _, degeneracy = inertia(SymForm(self.metric(point)))
            if degeneracy:
                raise UnsupportedManifoldError(f"metric degenerate at {list(point)}")
            if index is not None and n_minus != index:
                raise UnsupportedManifoldError(f"metric index changes at {list(point)}")
            index = n_minus
        return int(index or 0)

    # vector fields

    def field(self, entry) -> sympy.Matrix:
        """Vector field from a coordinate name (the coordinate field) or a list of component expressions."""
        n = self.n
        if isinstance(entry, str) and entry.strip() in self.manifold.names:
            column = sympy.zeros(n, 1)
            column[self.manifold.index_of(entry.strip()), 0] = 1
            return column
        try:
            return sympy.Matrix(parse_matrix(entry, (n, 1), self.manifold.coordinates))
        except ExpressionError as e:
            raise UnsupportedManifoldError(f"vector field {entry!r}: {e}")

    def nabla(self, Y: sympy.Matrix, Z: sympy.Matrix) -> sympy.Matrix:
        """(nabla_Y Z)^a = Y^b d_b Z^a + Gamma^a_bc Y^b Z^c."""
        x, n = self.manifold.coordinates, self.n
        return sympy.Matrix([sympy.simplify(
            sum(Y[b] * sympy.diff(Z[a], x[b]) for b in range(n))
            + sum(self.gamma_sym[a][b][c] * Y[b] * Z[c] for b in range(n) for c in range(n)))
            for a in range(n)])

    def lie_derivative_metric(self, Y: sympy.Matrix) -> sympy.Matrix:
        """(L_Y g)_ab = Y^c d_c g_ab + g_cb d_a Y^c + g_ac d_b Y^c."""
        x, n, g = self.manifold.coordinates, self.n, self.g_sym
        return sympy.Matrix(n, n, lambda a, b: sympy.simplify(
            sum(Y[c] * sympy.diff(g[a, b], x[c]) + g[c, b] * sympy.diff(Y[c], x[a]) + g[a, c] * sympy.diff(Y[c], x[b])
                for c in range(n))))

    def bracket(self, Y: sympy.Matrix, Z: sympy.Matrix) -> sympy.Matrix:
        x, n = self.manifold.coordinates, self.n
        return sympy.Matrix([sympy.simplify(
            sum(Y[b] * sympy.diff(Z[a], x[b]) - Z[b] * sympy.diff(Y[a], x[b]) for b in range(n)))
            for a in range(n)])

    def check_killing(self, fields: List[sympy.Matrix]) -> bool:
        """Raise unless every field is Killing; return whether the fields pairwise commute."""
        for i, Y in enumerate(fields):
            if self.lie_derivative_metric(Y) != sympy.zeros(self.n, self.n):
                raise NonKillingFieldError(f"field {i + 1} does not satisfy the Killing equation")
        commuting = all(
            self.bracket(fields[i], fields[j]) == sympy.zeros(self.n, 1)
            for i in range(len(fields)) for j in range(i + 1, len(fields))
        )
        if not commuting:
            logger.warning("Reduction fields are Killing but do not commute")
        return commuting

    def compile_field(self, Y: sympy.Matrix):
        """(value, jacobian) callables; jacobian[a, b] = d_b Y^a."""
        x = self.manifold.coordinates
        value = sympy.lambdify(x, list(Y), modules="numpy")
        jacobian = sympy.lambdify(x, Y.jacobian(sympy.Matrix(x)).tolist(), modules="numpy")
        return (lambda p: np.array(value(*p), dtype=float)), (lambda p: np.array(jacobian(*p), dtype=float))
