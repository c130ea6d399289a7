"""Periodic zero-mean polynomial basis on [0, 1]^d.

The 1-D functions built from shifted Legendre polynomials L_k (L_k(1) = 1) are

    phi_0 = L_0,   phi_{2i-1} = L_{2i},   phi_{2i} = L_{2i+1} - L_1,

all of which take equal values at 0 and 1.  For order p the indices
0..p-1 are used, so the highest degree is p.  The d-dimensional members are
tensor products indexed by the flat index i = i_1 + p i_2 + ... + p^{d-1} i_d;
flat index 0 (the constant) is dropped, leaving n_b = p^d - 1 members.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np


def shifted_legendre_all(n: int, x):
    """Values and derivatives of L_0..L_n at x; arrays of shape x.shape + (n+1,)."""
    x = np.asarray(x, dtype=float)
    s = 2.0 * x - 1.0
    V = np.empty(x.shape + (n + 1,))
    D = np.empty(x.shape + (n + 1,))
    V[..., 0], D[..., 0] = 1.0, 0.0
    if n >= 1:
        V[..., 1], D[..., 1] = s, 2.0
    for k in range(1, n):
        V[..., k + 1] = ((2 * k + 1) * s * V[..., k] - k * V[..., k - 1]) / (k + 1)
        D[..., k + 1] = D[..., k - 1] + 2.0 * (2 * k + 1) * V[..., k]
    return V, D


def shifted_legendre(i: int, x):
    """(L_i(x), L_i'(x)) for the Legendre polynomial shifted to [0, 1]."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    V, D = shifted_legendre_all(i, x)
    return V[..., i], D[..., i]


def periodic_1d(p: int, x):
    """phi_0..phi_{p-1} and derivatives at x; shape x.shape + (p,)."""
    V, D = shifted_legendre_all(p, x)
    vals = V[..., 1:p + 1].copy()
    ders = D[..., 1:p + 1].copy()
    vals[..., 0], ders[..., 0] = 1.0, 0.0
    # even k >= 2 subtract L_1
    vals[..., 2::2] -= V[..., 1:2]
    ders[..., 2::2] -= D[..., 1:2]
    return vals, ders


def periodic_1d_legendre_coefficients(p: int) -> np.ndarray:
    """Row k holds the coefficients of phi_k in L_0..L_p."""
    C = np.zeros((p, p + 1))
    C[0, 0] = 1.0
    for k in range(1, p):
        C[k, k + 1] = 1.0
        if k % 2 == 0:
            C[k, 1] = -1.0
    return C


class PeriodicBasis:
    """phi_1..phi_{n_b}; with ``extended`` the constant is appended as member n_b + 1."""

    def __init__(self, d: int, p: int, extended: bool = False):
        if p < 2:
            raise ValueError("polynomial order p must be >= 2")
        if not 1 <= d <= 3:
            raise ValueError("dimension must be 1, 2 or 3")
        self.d, self.p, self.extended = int(d), int(p), bool(extended)

    def __repr__(self):
        return f"PeriodicBasis(d={self.d}, p={self.p}, extended={self.extended})"

    @property
    def n_b(self) -> int:
        return self.p ** self.d - 1

    @property
    def size(self) -> int:
        """Number of members, counting the appended constant."""
        return self.n_b + int(self.extended)

    def with_constant(self) -> "PeriodicBasis":
        return PeriodicBasis(self.d, self.p, extended=True)

    def multi_index(self, i: int) -> tuple:
        if not 0 <= i < self.p ** self.d:
            raise IndexError(f"flat index {i} out of range")
        return tuple(int(v) for v in np.unravel_index(i, (self.p,) * self.d, order="F"))

    def flat_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), (self.p,) * self.d, order="F"))

    @cached_property
    def multi_indices(self) -> np.ndarray:
        """(size, d) array of 1-D indices per member, constant last when extended."""
        flat = np.arange(1, self.p ** self.d)
        if self.extended:
            flat = np.append(flat, 0)
        return np.stack(np.unravel_index(flat, (self.p,) * self.d, order="F"), axis=1)

    def eval(self, points):
        """Values (n, size) and gradients (n, size, d) at points (n, d)."""
        x = np.asarray(points, dtype=float).reshape(-1, self.d)
        v1, d1 = periodic_1d(self.p, x)                       # (n, d, p)
        idx = self.multi_indices
        factors = np.stack([v1[:, j, idx[:, j]] for j in range(self.d)], axis=0)  # (d, n, size)
        dfactors = np.stack([d1[:, j, idx[:, j]] for j in range(self.d)], axis=0)
        vals = np.prod(factors, axis=0)
        grads = np.empty(vals.shape + (self.d,))
        for j in range(self.d):
            g = dfactors[j].copy()
            for l in range(self.d):
                if l != j:
                    g *= factors[l]
            grads[..., j] = g
        return vals, grads

    def values(self, points):
        return self.eval(points)[0]


def basis_eval(basis: PeriodicBasis, i: int, x):
    """Value and gradient of member i (1-based; n_b + 1 is the constant of an extended basis)."""
    if not 1 <= i <= basis.size:
        raise IndexError(f"basis index {i} outside 1..{basis.size}")
    v, g = basis.eval(np.asarray(x, dtype=float).reshape(1, basis.d))
    return float(v[0, i - 1]), g[0, i - 1]
