"""Text mini-language for symbols.

Grammar: python-like arithmetic over ``xi1..xin`` with ``^`` or ``**`` for
powers, complex literals written as pairs ``(re,im)``, rational literals, and
the functions ``exp`` and ``sqrt`` plus division.  Polynomial expressions
parse to :class:`~weylcalc.poly.PolySymbol`; anything else parses to an
:class:`ExprSymbol`, a numeric closed form that can be evaluated on arrays.
"""
from __future__ import annotations

import ast
import re
from fractions import Fraction

import numpy as np

from .poly import PolySymbol

_VAR = re.compile(r"^xi(\d+)$")
_FUNCS = {"exp": np.exp, "sqrt": np.sqrt}


class SymbolSyntaxError(ValueError):
    pass


class ExprSymbol:
    """Closed-form numeric symbol built from an expression tree."""

    def __init__(self, nvars: int, tree: ast.AST, text: str):
        self.nvars = nvars
        self.tree = tree
        self.text = text

    def __call__(self, xi):
        xi = np.asarray(xi)
        if xi.shape[-1] != self.nvars:
            raise ValueError(f"points must have last axis {self.nvars}")
        return np.asarray(_eval_numeric(self.tree, xi), dtype=complex) * np.ones(xi.shape[:-1])

    def __repr__(self):
        return f"ExprSymbol({self.nvars}, {self.text!r})"


def _prepare(text: str) -> ast.AST:
    try:
        return ast.parse(text.replace("^", "**"), mode="eval").body
    except SyntaxError as exc:
        raise SymbolSyntaxError(f"cannot parse symbol {text!r}: {exc.msg}") from None


def _literal(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        v = _literal(node.operand)
        return None if v is None else -v
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        a, b = _literal(node.left), _literal(node.right)
        if isinstance(a, int) and isinstance(b, int) and b != 0:
            return Fraction(a, b)
        return None if a is None or b is None or b == 0 else a / b
    return None


def _poly(node, n):
    """Try to read ``node`` as an exact polynomial; return None otherwise."""
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise SymbolSyntaxError(f"unsupported literal {node.value!r}")
        v = node.value
        return PolySymbol.constant(n, Fraction(v) if isinstance(v, int) else v)
    if isinstance(node, ast.Tuple):
        if len(node.elts) != 2:
            raise SymbolSyntaxError("complex literal must be a pair (re,im)")
        parts = [_literal(e) for e in node.elts]
        if any(p is None for p in parts):
            raise SymbolSyntaxError("complex literal parts must be numbers")
        return PolySymbol.constant(n, (parts[0], parts[1]))
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if not m:
            raise SymbolSyntaxError(f"unknown name {node.id!r}")
        i = int(m.group(1)) - 1
        if not 0 <= i < n:
            raise SymbolSyntaxError(f"variable {node.id} outside 1..{n}")
        return PolySymbol.variable(n, i)
    if isinstance(node, ast.UnaryOp):
        v = _poly(node.operand, n)
        if v is None:
            return None
        if isinstance(node.op, ast.USub):
            return -v
        if isinstance(node.op, ast.UAdd):
            return v
        raise SymbolSyntaxError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            base = _poly(node.left, n)
            e = _literal(node.right)
            if base is None or not isinstance(e, int) or e < 0:
                _check_tree(node, n)
                return None
            return base ** e
        a, b = _poly(node.left, n), _poly(node.right, n)
        if isinstance(node.op, ast.Add):
            return None if a is None or b is None else a + b
        if isinstance(node.op, ast.Sub):
            return None if a is None or b is None else a - b
        if isinstance(node.op, ast.Mult):
            return None if a is None or b is None else a * b
        if isinstance(node.op, ast.Div):
            if a is not None and b is not None and b.degree == 0:
                c = b.coefficient((0,) * n)
                return a * (1 / c)
            _check_tree(node, n)
            return None
        raise SymbolSyntaxError("unsupported operator")
    if isinstance(node, ast.Call):
        _check_tree(node, n)
        return None
    raise SymbolSyntaxError(f"unsupported syntax {type(node).__name__}")


def _check_tree(node, n):
    for sub in ast.walk(node):
        if isinstance(sub, ast.Call):
            if not isinstance(sub.func, ast.Name) or sub.func.id not in _FUNCS or len(sub.args) != 1 or sub.keywords:
                raise SymbolSyntaxError("only exp(.) and sqrt(.) calls are allowed")
        elif isinstance(sub, ast.Name):
            if sub.id in _FUNCS:
                continue
            m = _VAR.match(sub.id)
            if not m or not 0 < int(m.group(1)) <= n:
                raise SymbolSyntaxError(f"unknown name {sub.id!r}")
        elif isinstance(sub, (ast.BinOp, ast.UnaryOp, ast.Constant, ast.Tuple, ast.Load,
                              ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)):
            continue
        else:
            raise SymbolSyntaxError(f"unsupported syntax {type(sub).__name__}")


def _eval_numeric(node, xi):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Tuple):
        return complex(_literal(node.elts[0]), _literal(node.elts[1]))
    if isinstance(node, ast.Name):
        return xi[..., int(_VAR.match(node.id).group(1)) - 1].astype(complex)
    if isinstance(node, ast.UnaryOp):
        v = _eval_numeric(node.operand, xi)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _eval_numeric(node.left, xi), _eval_numeric(node.right, xi)
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return np.power(np.asarray(a, dtype=complex), b)
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](np.asarray(_eval_numeric(node.args[0], xi), dtype=complex))
    raise SymbolSyntaxError(f"cannot evaluate {type(node).__name__}")


def parse_symbol(text: str, nvars: int):
    """Parse ``text`` into a PolySymbol when polynomial, else an ExprSymbol."""
    tree = _prepare(text)
    p = _poly(tree, nvars)
    if p is not None:
        return p
    _check_tree(tree, nvars)
    return ExprSymbol(nvars, tree, text)
