"""Gauss-Lobatto and composite Gauss-Legendre rules on [0, 1]^d."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


class QuadratureError(ArithmeticError):
    pass


def legendre_and_derivative(n: int, x):
    """P_n(x) and P_n'(x) on [-1, 1] by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0, p1 = np.ones_like(x), x.copy()
    d0, d1 = np.zeros_like(x), np.ones_like(x)
    if n == 0:
        return p0, d0
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
        d0, d1 = d1, d0 + (2 * k + 1) * p0
    return p1, d1


@lru_cache(maxsize=None)
def _gll_1d(q: int):
    if q < 2:
        raise ValueError("Gauss-Lobatto needs q >= 2")
    N = q - 1
    # interior nodes are the roots of P_N' ~ P^{(1,1)}_{N-1}
    inner = roots_jacobi(N - 1, 1.0, 1.0)[0] if N > 1 else np.zeros(0)
    x = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    if not np.all(np.isfinite(x)):
        raise QuadratureError(f"Gauss-Lobatto nodes for q={q} are not finite")
    x = 0.5 * (x - x[::-1])          # exact symmetry about 0
    x[0], x[-1] = -1.0, 1.0
    P, _ = legendre_and_derivative(N, x)
    w = 2.0 / (N * (N + 1) * P ** 2)
    w = 0.5 * (w + w[::-1])
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    d: int
    q: int
    nodes: np.ndarray      # (n_q, d); first coordinate varies fastest
    weights: np.ndarray    # (n_q,)
    nodes1d: np.ndarray
    weights1d: np.ndarray
    kind: str = "gauss-lobatto"

    @property
    def n_q(self) -> int:
        return self.weights.size

    def integrate(self, values) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def tensorize(x1, w1, d: int):
    grids = np.meshgrid(*([x1] * d), indexing="ij")
    wgrids = np.meshgrid(*([w1] * d), indexing="ij")
    nodes = np.stack([g.ravel(order="F") for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel(order="F") for g in wgrids], axis=1), axis=1)
    return nodes, weights


def gauss_lobatto(q: int, d: int = 1) -> QuadratureRule:
    x1, w1 = _gll_1d(int(q))
    nodes, weights = tensorize(x1, w1, d)
    return QuadratureRule(d, int(q), nodes, weights, x1, w1)


def gauss_legendre(order: int, d: int = 1, cells: int = 1) -> QuadratureRule:
    """Composite Gauss-Legendre rule with ``cells`` equal subintervals per axis."""
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.arange(cells) / cells
    x1 = (edges[:, None] + (g[None, :] + 1.0) / (2 * cells)).ravel()
    w1 = np.tile(w / (2 * cells), cells)
    nodes, weights = tensorize(x1, w1, d)
    return QuadratureRule(d, order * cells, nodes, weights, x1, w1, kind="gauss-legendre")
