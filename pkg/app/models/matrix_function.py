"""
Matrix Function Model
=====================================
Evaluable matrix-valued functions t -> M(t) shared by every numerical service.

Kinds:
- symbolic: sympy expression matrix in t, exact derivative by differentiation
- tabulated: cubic spline through samples, derivative from the spline
- callable: plain numeric function, derivative by central differences

Pointwise algebra (sum, product, transpose, inverse) keeps exact derivatives
through the product and inverse rules whenever both sides have one.
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy.interpolate import CubicSpline

from app.core.config import DIFF_STEP
from app.core.errors import SymplecticError

T = sympy.Symbol("t", real=True)


class ExpressionError(SymplecticError):
    pass


class MatrixFunction:
    """Evaluable matrix function of t with an optional exact derivative."""

    def __init__(
        self,
        fn: Callable[[float], np.ndarray],
        shape: Sequence[int],
        derivative: Optional[Callable[[], "MatrixFunction"]] = None,
        expr: Optional[sympy.Matrix] = None,
        step: float = DIFF_STEP,
        label: str = "",
    ):
        self._fn = fn
        self.shape = tuple(int(s) for s in shape)
        self._derivative = derivative
        self.expr = expr
        self.step = step
        self.label = label

    # construction

    @classmethod
    def symbolic(cls, expr, step: float = DIFF_STEP, label: str = "") -> "MatrixFunction":
        expr = sympy.Matrix(expr)
        extra = expr.free_symbols - {T}
        if extra:
            raise ExpressionError(f"time functions may only depend on t, found {sorted(s.name for s in extra)}")
        shape = expr.shape
        if 0 in shape:
            zero = np.zeros(shape)
            return cls(lambda t: zero, shape, expr=expr, step=step, label=label)
        compiled = sympy.lambdify(T, expr, modules="numpy")
        return cls(compiled, shape, expr=expr, step=step, label=label)

    @classmethod
    def constant(cls, value, label: str = "") -> "MatrixFunction":
        value = np.array(value, dtype=float)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        frozen = value.copy()
        shape = frozen.shape
        return cls(lambda t: frozen, shape, derivative=lambda: cls.zeros(shape), label=label)

    @classmethod
    def zeros(cls, shape) -> "MatrixFunction":
        zero = np.zeros(shape)
        return cls(lambda t: zero, shape, derivative=lambda: cls.zeros(shape), label="0")

    @classmethod
    def identity(cls, n: int) -> "MatrixFunction":
        return cls.constant(np.eye(n), label="I")

    @classmethod
    def from_callable(cls, fn, shape, interval: Tuple[float, float] = (0.0, 1.0), label: str = "") -> "MatrixFunction":
        return cls(fn, shape, step=DIFF_STEP * (interval[1] - interval[0]), label=label)

    @classmethod
    def tabulated(cls, times, values, label: str = "") -> "MatrixFunction":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        spline = CubicSpline(times, values, axis=0)
        return cls._from_spline(spline, values.shape[1:], step=DIFF_STEP * (times[-1] - times[0]), label=label)

    @classmethod
    def _from_spline(cls, spline, shape, step, label="") -> "MatrixFunction":
        return cls(
            spline,
            shape,
            derivative=lambda: cls._from_spline(spline.derivative(), shape, step, label + "'"),
            step=step,
            label=label,
        )

    # evaluation

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self._fn(float(t)), dtype=float).reshape(self.shape)

    def sample(self, times) -> np.ndarray:
        return np.stack([self(t) for t in times]) if len(times) else np.zeros((0, *self.shape))

    @property
    def exact(self) -> bool:
        return self.expr is not None or self._derivative is not None

    def with_step(self, step: float) -> "MatrixFunction":
        return MatrixFunction(self._fn, self.shape, self._derivative, self.expr, step, self.label)

    def derivative(self, step: Optional[float] = None) -> "MatrixFunction":
        if self.expr is not None:
            return MatrixFunction.symbolic(self.expr.diff(T), step=step or self.step, label=self.label + "'")
        if self._derivative is not None:
            return self._derivative()
        h = step or self.step
        fn = self.__call__
        return MatrixFunction(
            lambda t: (fn(t + h) - fn(t - h)) / (2.0 * h),
            self.shape,
            step=h,
            label=self.label + "'",
        )

    # pointwise algebra

    def _combine(self, other: "MatrixFunction", op, shape, deriv) -> "MatrixFunction":
        fn_a, fn_b = self.__call__, other.__call__
        derivative = deriv if (self.exact and other.exact) else None
        return MatrixFunction(lambda t: op(fn_a(t), fn_b(t)), shape, derivative=derivative, step=min(self.step, other.step))

    def __add__(self, other: "MatrixFunction") -> "MatrixFunction":
        if self.expr is not None and other.expr is not None:
            return MatrixFunction.symbolic(self.expr + other.expr, step=min(self.step, other.step))
        return self._combine(other, np.add, self.shape, lambda: self.derivative() + other.derivative())

    def __sub__(self, other: "MatrixFunction") -> "MatrixFunction":
        return self + (-other)

    def __neg__(self) -> "MatrixFunction":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "MatrixFunction":
        if self.expr is not None:
            return MatrixFunction.symbolic(self.expr * factor, step=self.step)
        fn = self.__call__
        derivative = (lambda: self.derivative().scale(factor)) if self.exact else None
        return MatrixFunction(lambda t: factor * fn(t), self.shape, derivative=derivative, step=self.step)

    def __matmul__(self, other: "MatrixFunction") -> "MatrixFunction":
        if self.shape[1] != other.shape[0]:
            raise ExpressionError(f"cannot multiply {self.shape} by {other.shape}")
        if self.expr is not None and other.expr is not None:
            return MatrixFunction.symbolic(self.expr * other.expr, step=min(self.step, other.step))
        return self._combine(
            other,
            np.matmul,
            (self.shape[0], other.shape[1]),
            lambda: self.derivative() @ other + self @ other.derivative(),
        )

    @property
    def T(self) -> "MatrixFunction":
        if self.expr is not None:
            return MatrixFunction.symbolic(self.expr.T, step=self.step)
        fn = self.__call__
        derivative = (lambda: self.derivative().T) if self.exact else None
        return MatrixFunction(lambda t: fn(t).T, self.shape[::-1], derivative=derivative, step=self.step)

    def inv(self) -> "MatrixFunction":
        fn = self.__call__
        inverse = MatrixFunction(lambda t: np.linalg.inv(fn(t)), self.shape, step=self.step)
        if self.exact:
            inverse._derivative = lambda: -(inverse @ self.derivative() @ inverse)
        return inverse

    def symmetrized(self) -> "MatrixFunction":
        return (self + self.T).scale(0.5)

    def columns(self, index) -> "MatrixFunction":
        """Restrict to a subset of columns (a slice or index list)."""
        if self.expr is not None:
            sub = self.expr[:, index] if isinstance(index, slice) else self.expr.extract(list(range(self.shape[0])), list(index))
            return MatrixFunction.symbolic(sub, step=self.step)
        fn = self.__call__
        width = len(range(self.shape[1])[index]) if isinstance(index, slice) else len(index)
        derivative = (lambda: self.derivative().columns(index)) if self.exact else None
        return MatrixFunction(lambda t: fn(t)[:, index], (self.shape[0], width), derivative=derivative, step=self.step)

    def __repr__(self) -> str:
        kind = "symbolic" if self.expr is not None else ("exact" if self._derivative else "numeric")
        return f"MatrixFunction({self.label or '?'}, shape={self.shape}, {kind})"
