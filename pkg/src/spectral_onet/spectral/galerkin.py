"""Galerkin assembly with numerical integration and the reference solver."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import sympy

from .basis import PeriodicBasis
from .coefficients import CoefficientField
from .functions import ScalarFunction
from .quadrature import QuadratureRule, gauss_legendre, gauss_lobatto


class PreconditionError(ValueError):
    pass


class AssemblyError(ArithmeticError):
    pass


class SpectrumError(AssertionError):
    pass


def _eval(f, pts) -> np.ndarray:
    if f is None:
        return np.zeros(len(pts))
    if hasattr(f, "value"):
        return np.asarray(f.value(pts), dtype=float)
    return np.asarray(f(pts), dtype=float)


def stiffness_matrix(grads, weights, coef_vals=None) -> np.ndarray:
    """sum_k w_k a_k grad phi_j . grad phi_i; coef_vals (n_q,) or (n_q, d, d) or None for a = 1."""
    n, nb, d = grads.shape
    if coef_vals is None or np.ndim(coef_vals) == 1:
        w = weights if coef_vals is None else weights * coef_vals
        S = np.zeros((nb, nb))
        for j in range(d):
            g = grads[:, :, j]
            S += g.T @ (w[:, None] * g)
        return 0.5 * (S + S.T)
    flux = np.einsum("kmn,kjn->kjm", coef_vals, grads)   # A grad phi_j
    S = np.zeros((nb, nb))
    for m in range(d):
        S += grads[:, :, m].T @ (weights[:, None] * flux[:, :, m])
    return 0.5 * (S + S.T)


def mass_matrix(vals, weights, coef_vals=None) -> np.ndarray:
    w = weights if coef_vals is None else weights * coef_vals
    M = vals.T @ (w[:, None] * vals)
    return 0.5 * (M + M.T)


def _cholesky(A, what):
    try:
        L = sla.cholesky(A, lower=True)
    except sla.LinAlgError as exc:
        raise AssemblyError(f"{what} is not positive definite: {exc}") from None
    piv = np.diag(L) ** 2
    if piv.min() < 1e-12 * np.linalg.norm(A, 2):
        raise AssemblyError(f"{what} is numerically singular (coercivity violated)")
    return L


@dataclass(eq=False)
class DiscreteSystem:
    basis: PeriodicBasis
    quad: QuadratureRule
    coef: CoefficientField
    stiffness: np.ndarray           # A^a
    reference: np.ndarray           # A^1 (or the H^1 Gram matrix for reaction-diffusion)
    rhs: np.ndarray                 # c_f
    chol_stiffness: np.ndarray
    chol_reference: np.ndarray

    @cached_property
    def preconditioned(self) -> np.ndarray:
        """(A^1)^-1 A^a."""
        return sla.cho_solve((self.chol_reference, True), self.stiffness)

    @cached_property
    def sym_preconditioned(self) -> np.ndarray:
        """L^-1 A^a L^-T with A^1 = L L^T; symmetric, same spectrum as the left form."""
        L = self.chol_reference
        X = sla.solve_triangular(L, self.stiffness, lower=True)
        X = sla.solve_triangular(L, X.T, lower=True)
        return 0.5 * (X + X.T)

    @cached_property
    def preconditioned_rhs(self) -> np.ndarray:
        return sla.cho_solve((self.chol_reference, True), self.rhs)

    @cached_property
    def solution(self) -> np.ndarray:
        return sla.cho_solve((self.chol_stiffness, True), self.rhs)

    @property
    def bounds(self) -> tuple[float, float]:
        return self.coef.coercivity, self.coef.continuity

    def field(self) -> "SolutionField":
        return SolutionField(self.basis, self.solution)


def assemble(coef: CoefficientField, basis: PeriodicBasis, quad: QuadratureRule, f=None,
             q_f: int | None = None) -> DiscreteSystem:
    """Stiffness, reference matrix and load vector with Gauss-Lobatto integration.

    The matrix-plus-reaction kind is assembled over the basis extended by the
    constant; its reference matrix is the H^1 Gram matrix.
    """
    if quad.d != basis.d or coef.d != basis.d:
        raise ValueError("dimension mismatch between coefficient, basis and quadrature")
    if quad.q < basis.p + 1:
        raise PreconditionError(f"quadrature order q={quad.q} must be at least p+1={basis.p + 1}")
    rd = coef.kind != "scalar"
    if rd and not basis.extended:
        basis = basis.with_constant()
    if not rd and basis.extended:
        raise ValueError("scalar diffusion uses the zero-mean basis")
    vals, grads = basis.eval(quad.nodes)
    w = quad.weights
    if rd:
        Acoef = coef.values(quad.nodes)
        if np.max(np.abs(Acoef - np.swapaxes(Acoef, 1, 2))) > 1e-12:
            raise ValueError("matrix coefficient samples are not symmetric")
        S = stiffness_matrix(grads, w, Acoef) + mass_matrix(vals, w, coef.reaction(quad.nodes))
        R = stiffness_matrix(grads, w) + mass_matrix(vals, w)
    else:
        S = stiffness_matrix(grads, w, coef.values(quad.nodes))
        R = stiffness_matrix(grads, w)
    # load vector at a higher order
    fq = gauss_lobatto(quad.q + 4 if q_f is None else q_f, basis.d)
    fv = _eval(f, fq.nodes)
    if not rd and f is not None:
        # the mean is checked on a fine rule, the low-order load rule is too coarse for it
        mq = gauss_legendre(32, basis.d)
        mv = _eval(f, mq.nodes)
        if abs(mq.weights @ mv) > 1e-10 * max(1.0, float(mq.weights @ np.abs(mv))):
            raise ValueError("source term must have zero mean for pure diffusion")
    rhs = basis.values(fq.nodes).T @ (fq.weights * fv)
    L_S = _cholesky(S, "stiffness matrix")
    L_R = _cholesky(R, "reference matrix")
    return DiscreteSystem(basis, quad, coef, S, R, rhs, L_S, L_R)


class SolutionField:
    """v = sum_i w_i phi_i (the constant is the last entry for an extended basis)."""

    def __init__(self, basis: PeriodicBasis, coefficients):
        self.basis = basis
        self.coefficients = np.asarray(coefficients, dtype=float)
        if self.coefficients.shape != (basis.size,):
            raise ValueError("coefficient vector does not match the basis")

    def value(self, points):
        return self.basis.values(points) @ self.coefficients

    def gradient(self, points):
        _, g = self.basis.eval(points)
        return np.einsum("nid,i->nd", g, self.coefficients)


def galerkin_solve(coef: CoefficientField, f, p: int, q: int | None = None) -> SolutionField:
    basis = PeriodicBasis(coef.d, p)
    quad = gauss_lobatto(p + 1 if q is None else q, coef.d)
    return assemble(coef, basis, quad, f).field()


def spectrum_bounds(sys: DiscreteSystem, check: bool = True) -> tuple[float, float]:
    """Extreme eigenvalues of A^a v = lambda A^1 v through B^-1/2 A B^-1/2."""
    lam, V = np.linalg.eigh(sys.reference)
    if lam.min() <= 0:
        raise AssemblyError("reference matrix is not positive definite")
    Bh = (V / np.sqrt(lam)) @ V.T
    ev = np.linalg.eigvalsh(Bh @ sys.stiffness @ Bh)
    lo, hi = float(ev[0]), float(ev[-1])
    if check:
        c, C = sys.bounds
        tol = 1e-8 * C
        if lo < c - tol or hi > C + tol:
            raise SpectrumError(f"spectrum [{lo}, {hi}] not inside [{c}, {C}]")
    return lo, hi


def manufactured_problem(u_spec: ScalarFunction, coef: CoefficientField, check_mean: bool = True) -> ScalarFunction:
    """Source f = -div(a grad u) (+ c u) in closed form."""
    if not u_spec.is_periodic():
        raise ValueError("manufactured solution is not periodic")
    xs = u_spec.symbols
    gu = u_spec.grad_exprs
    if coef.kind == "scalar":
        a = coef.a.expr
        f = -sum(sympy.diff(a * gu[j], xs[j]) for j in range(coef.d))
    else:
        f = -sum(sympy.diff(coef.A[m][n].expr * gu[n], xs[m]) for m in range(coef.d) for n in range(coef.d))
        f = f + coef.c.expr * u_spec.expr
    src = ScalarFunction(f, coef.d)
    if check_mean and coef.kind == "scalar":
        fq = gauss_legendre(24, coef.d, cells=2)
        v = src.value(fq.nodes)
        if abs(fq.weights @ v) > 1e-12 * max(1.0, fq.weights @ np.abs(v)):
            raise ValueError("manufactured source does not have zero mean")
    return src
