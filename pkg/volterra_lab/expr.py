"""
Arithmetic expressions for config-supplied functions.

Expressions like `exp(-s)`, `t**2` or `sign(x)*sqrt(abs(x))` are parsed by
sympy and turned into numpy functions with `lambdify`. The source is screened
with `ast` first, because `parse_expr` evaluates what it is given: only
numbers, the declared variables, a few constants, + - * / ** and a fixed set
of functions get through.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import sympy as sp
from sympy.codegen.cfunctions import log1p
from sympy.parsing.sympy_parser import parse_expr

from .errors import ExpressionError

# name -> number of arguments
_ARITY = {
    "exp": 1,
    "log": 1,
    "log1p": 1,
    "sqrt": 1,
    "abs": 1,
    "sign": 1,
    "pow": 2,
    "min": 2,
    "max": 2,
}

# Elementwise min/max; sympy's Min/Max print as numpy reductions.
_MINIMUM = sp.Function("minimum")
_MAXIMUM = sp.Function("maximum")

_SYMPY_NAMES: dict[str, Any] = {
    "exp": sp.exp,
    "log": sp.log,
    "log1p": log1p,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
    "sign": sp.sign,
    "pow": lambda a, b: a**b,
    "min": _MINIMUM,
    "max": _MAXIMUM,
    "e": sp.E,
    "pi": sp.pi,
    "inf": sp.oo,
}

_MODULES = [{"minimum": np.minimum, "maximum": np.maximum}, "numpy"]

_ALLOWED_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def _screen(node: ast.AST, variables: tuple[str, ...]) -> None:
    if isinstance(node, ast.Expression):
        return _screen(node.body, variables)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal: {node.value!r}")
        return None
    if isinstance(node, ast.Name):
        if node.id not in variables and node.id not in ("e", "pi", "inf"):
            raise ExpressionError(f"unknown name: {node.id}")
        return None
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_OPS):
            raise ExpressionError(f"unsupported operator: {type(node.op).__name__}")
        _screen(node.left, variables)
        return _screen(node.right, variables)
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_OPS):
            raise ExpressionError(f"unsupported operator: {type(node.op).__name__}")
        return _screen(node.operand, variables)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _ARITY:
            raise ExpressionError(f"unsupported call: {ast.dump(node.func)}")
        if node.keywords:
            raise ExpressionError("keyword arguments are not supported")
        if len(node.args) != _ARITY[node.func.id]:
            raise ExpressionError(f"{node.func.id}() takes {_ARITY[node.func.id]} argument(s)")
        for a in node.args:
            _screen(a, variables)
        return None
    raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


@dataclass(frozen=True)
class Expression:
    text: str
    variables: tuple[str, ...]
    _fn: Callable[..., Any] = field(repr=False, compare=False)
    constant: bool = False
    symbolic: Any = field(default=None, repr=False, compare=False)

    def __call__(self, *values: Any) -> Any:
        if len(values) != len(self.variables):
            raise ExpressionError(f"expected {len(self.variables)} argument(s), got {len(values)}")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = self._fn(*values)
        if self.constant and values and isinstance(values[0], np.ndarray):
            return np.full(np.shape(values[0]), float(out))
        return out

    def __reduce__(self):
        # lambdified functions do not pickle; rebuild from source in worker processes.
        return (compile_expr, (self.text, self.variables))


def compile_expr(text: str, variables: tuple[str, ...] = ("t",)) -> Expression:
    src = str(text or "").strip()
    variables = tuple(variables)
    if not src:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"cannot parse {src!r}: {e.msg}") from e
    _screen(tree, variables)

    symbols = sp.symbols(",".join(variables), real=True, seq=True)
    local = dict(_SYMPY_NAMES)
    local.update(zip(variables, symbols))
    try:
        expr = parse_expr(src, local_dict=local)
    except (sp.SympifyError, TypeError, ValueError) as e:
        raise ExpressionError(f"cannot parse {src!r}: {e}") from e
    fn = sp.lambdify(symbols, expr, modules=_MODULES)
    constant = not (expr.free_symbols & set(symbols))
    return Expression(text=src, variables=variables, _fn=fn, constant=constant, symbolic=expr)
