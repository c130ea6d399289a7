"""Closed-form scalar functions on [0, 1]^d.

Expressions come from a small grammar: numbers, ``pi``, coordinates
``x1 .. x3`` (``x`` is an alias for ``x1``), ``sin``, ``cos`` and the
arithmetic operators.  sympy handles parsing and differentiation.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import sympy

COORDS = sympy.symbols("x1 x2 x3", real=True)


class ExpressionError(ValueError):
    pass


def _check_grammar(expr, d):
    allowed_syms = set(COORDS[:d])
    for node in sympy.preorder_traversal(expr):
        if isinstance(node, sympy.Symbol):
            if node not in allowed_syms:
                raise ExpressionError(f"unknown symbol {node}")
        elif isinstance(node, (sympy.Add, sympy.Mul, sympy.Number, sympy.sin, sympy.cos)):
            continue
        elif node is sympy.pi or isinstance(node, sympy.core.numbers.NumberSymbol):
            continue
        elif isinstance(node, sympy.Pow):
            if not node.exp.is_Integer:
                raise ExpressionError("only integer powers are allowed")
        else:
            raise ExpressionError(f"unsupported construct {type(node).__name__}")


def parse_expression(text: str, d: int):
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    names = {f"x{j + 1}": COORDS[j] for j in range(3)}
    names.update(x=COORDS[0], pi=sympy.pi, sin=sympy.sin, cos=sympy.cos)
    try:
        expr = sympy.sympify(text, locals=names, rational=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from None
    expr = sympy.sympify(expr)
    _check_grammar(expr, d)
    return expr


class ScalarFunction:
    """Function of x in [0, 1]^d with closed-form gradient and Hessian."""

    def __init__(self, expr, d: int):
        self.expr = sympy.sympify(expr)
        self.d = int(d)
        self.symbols = COORDS[:self.d]

    @classmethod
    def parse(cls, text: str, d: int) -> "ScalarFunction":
        return cls(parse_expression(text, d), d)

    @classmethod
    def constant(cls, c, d: int) -> "ScalarFunction":
        return cls(sympy.nsimplify(c) if isinstance(c, int) else sympy.Float(c), d)

    def __repr__(self):
        return f"ScalarFunction({self.expr}, d={self.d})"

    def __str__(self):
        return str(self.expr)

    def _lambdify(self, e):
        f = sympy.lambdify(self.symbols, e, modules="numpy")

        def run(points):
            x = np.asarray(points, dtype=float).reshape(-1, self.d)
            out = f(*[x[:, j] for j in range(self.d)])
            return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()
        return run

    @cached_property
    def _value(self):
        return self._lambdify(self.expr)

    @cached_property
    def grad_exprs(self):
        return [sympy.diff(self.expr, s) for s in self.symbols]

    @cached_property
    def _grads(self):
        return [self._lambdify(g) for g in self.grad_exprs]

    def value(self, points) -> np.ndarray:
        return self._value(points)

    __call__ = value

    def gradient(self, points) -> np.ndarray:
        return np.stack([g(points) for g in self._grads], axis=1)

    def hessian(self, points) -> np.ndarray:
        H = [[self._lambdify(sympy.diff(g, s)) for s in self.symbols] for g in self.grad_exprs]
        return np.stack([np.stack([h(points) for h in row], axis=1) for row in H], axis=1)

    def is_periodic(self, n: int = 64, tol: float = 1e-12, seed: int = 0) -> bool:
        """Values and gradients agree on opposite faces of the unit cube."""
        rng = np.random.default_rng(seed)
        for j in range(self.d):
            pts = rng.random((n, self.d))
            lo, hi = pts.copy(), pts.copy()
            lo[:, j], hi[:, j] = 0.0, 1.0
            if np.max(np.abs(self.value(lo) - self.value(hi))) > tol:
                return False
            if np.max(np.abs(self.gradient(lo) - self.gradient(hi))) > tol:
                return False
        return True

    # small algebra used when building families
    def __add__(self, other):
        return ScalarFunction(self.expr + _expr(other), self.d)

    def __mul__(self, other):
        return ScalarFunction(self.expr * _expr(other), self.d)

    __radd__ = __add__
    __rmul__ = __mul__


def _expr(v):
    return v.expr if isinstance(v, ScalarFunction) else sympy.sympify(v)


def trig_polynomial(d: int, terms) -> ScalarFunction:
    """sum c * cos|sin(2 pi k.x) + const from terms [(kind, k-tuple, c)] with kind in {'1','cos','sin'}."""
    expr = sympy.Integer(0)
    for kind, k, c in terms:
        c = sympy.Float(c) if not isinstance(c, (int, sympy.Basic)) else sympy.sympify(c)
        if kind == "1":
            expr += c
            continue
        arg = 2 * sympy.pi * sum(int(kj) * s for kj, s in zip(k, COORDS[:d]))
        expr += c * (sympy.cos(arg) if kind == "cos" else sympy.sin(arg))
    return ScalarFunction(expr, d)
