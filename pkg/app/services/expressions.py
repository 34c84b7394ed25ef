"""
Expression Grammar
=====================================
Scenario grammar for matrix entries: numbers, t, coordinates, + - * /,
** or ^, sin, cos, exp, sqrt, pi. Rows are separated by ';' and entries by ','.
"""

import logging
from typing import Iterable, Optional, Tuple

import sympy
from sympy.parsing.sympy_parser import auto_number, auto_symbol, convert_xor, parse_expr

from app.core.config import DIFF_STEP
from app.models.matrix_function import ExpressionError, MatrixFunction, T

logger = logging.getLogger(__name__)

GRAMMAR_NAMES = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "sqrt": sympy.sqrt,
    "pi": sympy.pi,
}

_PARSER_GLOBALS = {
    "__builtins__": {},
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
}


def parse_scalar(text: str, symbols: Iterable[sympy.Symbol] = ()) -> sympy.Expr:
    """Parse one entry of the scenario grammar into a sympy expression."""
    allowed = {T, *symbols}
    names = dict(GRAMMAR_NAMES)
    names.update({s.name: s for s in allowed})
    source = str(text).strip()
    if not source:
        raise ExpressionError("empty expression")
    try:
        expr = parse_expr(
            source,
            local_dict=names,
            global_dict=dict(_PARSER_GLOBALS),
            transformations=(auto_symbol, auto_number, convert_xor),
        )
    except Exception as e:
        raise ExpressionError(f"cannot parse {source!r}: {e}")
    if not isinstance(expr, sympy.Expr):
        raise ExpressionError(f"{source!r} is not a scalar expression")
    unknown = expr.free_symbols - allowed
    if unknown:
        raise ExpressionError(f"unknown name(s) {sorted(s.name for s in unknown)} in {source!r}")
    return expr


def parse_matrix(
    text,
    shape: Optional[Tuple[int, int]] = None,
    symbols: Iterable[sympy.Symbol] = (),
) -> sympy.Matrix:
    """
    Parse "a, b; c, d" into a sympy matrix.

    A single entry given for a square shape is read as that multiple of the
    identity, so `A = 0` works for any dimension.
    """
    if isinstance(text, (list, tuple)):
        text = ", ".join(str(item) for item in text)
    source = str(text).strip()
    symbols = tuple(symbols)

    if not source:
        if shape is not None and 0 in shape:
            return sympy.zeros(*shape)
        raise ExpressionError("empty matrix")

    rows = [row for row in source.split(";")]
    entries = [[parse_scalar(item, symbols) for item in row.split(",")] for row in rows]
    widths = {len(row) for row in entries}
    if len(widths) != 1:
        raise ExpressionError(f"rows of {source!r} have different lengths")

    matrix = sympy.Matrix(entries)
    if shape is None:
        return matrix
    if matrix.shape == (1, 1) and shape[0] == shape[1] and shape[0] != 1:
        return matrix[0, 0] * sympy.eye(shape[0])
    if matrix.shape == (1, shape[0]) and shape[1] == 1:
        return matrix.T
    if matrix.shape != tuple(shape):
        raise ExpressionError(f"expected a {shape[0]}x{shape[1]} matrix, got {matrix.shape[0]}x{matrix.shape[1]}")
    return matrix


def parse_function(text, shape, interval: Tuple[float, float] = (0.0, 1.0), label: str = "") -> MatrixFunction:
    """Symbolic matrix function of t with a finite-difference step scaled to the interval."""
    step = DIFF_STEP * (interval[1] - interval[0])
    logger.debug(f"Parsed {label or 'matrix'} {shape}: {text!r}")
    return MatrixFunction.symbolic(parse_matrix(text, shape), step=step, label=label)
