"""Tiny whitelisted evaluator for index formulas such as ``"k*log(k+1)**2"``."""
from __future__ import annotations

import ast
import math
import operator
from typing import Callable

import numpy as np

from .errors import InvalidInputError

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_CMP = {ast.Lt: operator.lt, ast.LtE: operator.le, ast.Gt: operator.gt,
        ast.GtE: operator.ge, ast.Eq: operator.eq}
_FUNCS = {"log": np.log, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs, "sin": np.sin,
          "cos": np.cos, "exp2": np.exp2, "where": np.where, "minimum": np.minimum,
          "maximum": np.maximum, "log2": np.log2}
_CONSTS = {"pi": math.pi, "e": math.e}


def compile_expression(src: str, variable: str = "k") -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``src`` into a vectorized function of ``variable``.

    Only arithmetic, comparisons, numeric literals, ``pi``, ``e`` and the
    functions in ``_FUNCS`` are accepted.
    """
    try:
        tree = ast.parse(str(src), mode="eval")
    except SyntaxError as exc:
        raise InvalidInputError(f"cannot parse expression {src!r}: {exc.msg}") from None

    def ev(node, x):
        if isinstance(node, ast.Expression):
            return ev(node.body, x)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == variable:
                return x
            if node.id in _CONSTS:
                return _CONSTS[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand, x))
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMP:
            return _CMP[type(node.ops[0])](ev(node.left, x), ev(node.comparators[0], x))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and not node.keywords:
            return _FUNCS[node.func.id](*(ev(a, x) for a in node.args))
        raise InvalidInputError(f"unsupported element {ast.dump(node)[:60]} in {src!r}")

    ev(tree, np.ones(1))  # reject bad syntax trees up front

    def f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = ev(tree, x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    f.source = str(src)
    return f
