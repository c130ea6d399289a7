"""Branch networks: coefficient samples -> Galerkin solution coefficients.

Layer one maps the encoded coefficient linearly to -alpha vec(A^a).  It is
followed by the preconditioner, which yields vec(Id - alpha A~) with A~ the
preconditioned stiffness.  Two forms are available:

* ``left``: A~ = (A^1)^-1 A^a, exactly as in the classical construction.
* ``symmetric``: A~ = L^-1 A^a L^-T with A^1 = L L^T.

Both have the same spectrum in [c, C].  Only the symmetric form guarantees
||Id - alpha A~||_2 <= 1 - alpha c, which the inversion network needs.  The
left form is not normal and its spectral norm can exceed that bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..calculus.inversion import InversionPlan, inversion_net, plan_inversion
from ..calculus.products import ApproxSpec
from ..nn_core import Network, affine_net, concat, sparse_concat
from ..spectral.basis import PeriodicBasis
from ..spectral.galerkin import mass_matrix, stiffness_matrix
from ..spectral.quadrature import QuadratureRule

PRECONDITIONERS = ("symmetric", "left")


@dataclass(eq=False)
class BranchContext:
    """Everything the branch needs that does not depend on the coefficient."""

    basis: PeriodicBasis
    quad: QuadratureRule
    kind: str                       # "scalar" or "rd"
    input_weights: sp.csr_matrix    # n^2 x n_enc, realizes vec(A^a) (without -alpha)
    reference: np.ndarray           # A^1, or the H^1 Gram matrix for rd
    chol: np.ndarray                # lower Cholesky factor of reference
    bounds: tuple                   # (coercivity, continuity)
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.reference.shape[0]

    @property
    def alpha(self) -> float:
        c, C = self.bounds
        return 1.0 / (c + C)

    @property
    def delta(self) -> float:
        return self.alpha * self.bounds[0]

    @property
    def C_A(self) -> float:
        """||reference^-1||_2 / n, the measured inverse-norm constant."""
        lam_min = np.linalg.eigvalsh(self.reference)[0]
        return 1.0 / (lam_min * self.n)

    def preconditioner_matrix(self, mode: str) -> np.ndarray:
        """P with vec(A~) = kron-form applied to vec(A^a); returns the n x n factor."""
        n = self.n
        if mode == "left":
            return sla.cho_solve((self.chol, True), np.eye(n))
        if mode == "symmetric":
            return sla.solve_triangular(self.chol, np.eye(n), lower=True)
        raise ValueError(f"unknown preconditioner {mode!r}; use one of {PRECONDITIONERS}")

    def preconditioned(self, stiffness, mode: str) -> np.ndarray:
        P = self.preconditioner_matrix(mode)
        return P @ stiffness if mode == "left" else P @ stiffness @ P.T


def _outer_columns(grads, weights):
    """Column k = w_k vec(G_k G_k^T) for G_k (n, d) gradients at node k."""
    n_q, n, d = grads.shape
    cols = np.zeros((n * n, n_q))
    for j in range(d):
        g = grads[:, :, j]
        cols += (weights[:, None, None] * g[:, None, :] * g[:, :, None]).reshape(n_q, n * n).T
    return cols


def scalar_context(basis: PeriodicBasis, quad: QuadratureRule, bounds) -> BranchContext:
    if quad.q < basis.p + 1:
        raise ValueError(f"quadrature order q={quad.q} must be at least p+1={basis.p + 1}")
    if basis.extended:
        raise ValueError("scalar branch uses the zero-mean basis")
    _, grads = basis.eval(quad.nodes)
    W = sp.csr_matrix(_outer_columns(grads, quad.weights))
    W.eliminate_zeros()
    R = stiffness_matrix(grads, quad.weights)
    L = sla.cholesky(R, lower=True)
    return BranchContext(basis, quad, "scalar", W, R, L, tuple(map(float, bounds)))


def rd_context(basis: PeriodicBasis, quad: QuadratureRule, bounds) -> BranchContext:
    """Input columns for the encoder layout [vec A(x_1), ..., vec A(x_nq), c(x_1), ..., c(x_nq)].

    The column for entry (m, n) of A(x_k) holds w_k d_n phi_j d_m phi_i at row
    i + N j; the column for c(x_k) holds the mass entries w_k phi_i phi_j.
    """
    if quad.q < basis.p + 1:
        raise ValueError(f"quadrature order q={quad.q} must be at least p+1={basis.p + 1}")
    if not basis.extended:
        basis = basis.with_constant()
    vals, grads = basis.eval(quad.nodes)
    n_q, N, d = grads.shape
    w = quad.weights
    blocks = []
    for k in range(n_q):
        G = grads[k]                                    # (N, d)
        # entry (m, n) -> rows i + N j value w dn phi_j dm phi_i
        cols = [w[k] * np.outer(G[:, m], G[:, n]).ravel(order="F")
                for n in range(d) for m in range(d)]    # vec(A) is column major: (m, n) at m + d n
        blocks.append(np.stack(cols, axis=1))
    D = np.concatenate(blocks, axis=1)                  # N^2 x d^2 n_q
    Mcols = (w[:, None, None] * vals[:, :, None] * vals[:, None, :]).reshape(n_q, N * N).T
    W = sp.csr_matrix(np.hstack([D, Mcols]))
    W.eliminate_zeros()
    R = stiffness_matrix(grads, w) + mass_matrix(vals, w)
    L = sla.cholesky(R, lower=True)
    return BranchContext(basis, quad, "rd", W, R, L, tuple(map(float, bounds)))


def input_layer_net(ctx_or_basis, quad=None, alpha: float = 1.0, bounds=(1.0, 1.0)) -> Network:
    """One-layer net: encoded coefficient -> -alpha vec(A^a)."""
    ctx = ctx_or_basis if isinstance(ctx_or_basis, BranchContext) else scalar_context(ctx_or_basis, quad, bounds)
    return affine_net(-alpha * ctx.input_weights)


def preconditioned_input_net(ctx_or_basis, quad=None, alpha: float | None = None, mode: str = "symmetric",
                             bounds=(1.0, 1.0)) -> Network:
    """Two-layer net: encoded coefficient -> vec(Id - alpha A~)."""
    ctx = ctx_or_basis if isinstance(ctx_or_basis, BranchContext) else scalar_context(ctx_or_basis, quad, bounds)
    alpha = ctx.alpha if alpha is None else alpha
    P = sp.csr_matrix(ctx.preconditioner_matrix(mode))
    n = ctx.n
    if mode == "left":
        K = sp.kron(sp.identity(n), P, format="csr")
    else:
        K = sp.kron(P, P, format="csr")
    K.eliminate_zeros()
    pre = affine_net(K, np.eye(n).ravel(order="F"))
    return sparse_concat(pre, input_layer_net(ctx, alpha=alpha))


@dataclass
class BranchReport:
    mode: str
    alpha: float
    delta: float
    eps_inv: float
    inversion: dict
    sizes: dict = field(default_factory=dict)


def branch_inversion_net(ctx: BranchContext, eps_inv: float, mode: str = "symmetric"):
    """Encoded coefficient -> approximation of vec(A~^-1) with spectral error <= eps_inv.

    Returns (net, report).
    """
    if not 0 < eps_inv < 1:
        raise ValueError("eps_inv must lie in (0, 1)")
    alpha, delta = ctx.alpha, ctx.delta
    inv_eps = min(eps_inv / alpha, 0.2)
    spec = ApproxSpec(inv_eps, 1.0, delta)
    plan = plan_inversion(ctx.n, spec)
    inv = inversion_net(ctx.n, spec, plan)
    scaled = concat(affine_net(alpha * sp.identity(ctx.n ** 2, format="csr")), inv)
    pre = preconditioned_input_net(ctx, alpha=alpha, mode=mode)
    net = sparse_concat(scaled, pre)
    rep = BranchReport(mode, alpha, delta, eps_inv, plan.as_dict(),
                       {"preconditioned_input": pre.size, "inversion": inv.size})
    return net, rep


def coefficient_readout(ctx: BranchContext, rhs, mode: str) -> sp.csr_matrix:
    """Linear map vec(M) -> solution coefficients for M ~ A~^-1."""
    n = ctx.n
    rhs = np.asarray(rhs, float)
    if mode == "left":
        ct = sla.cho_solve((ctx.chol, True), rhs)
        R = np.kron(ct[None, :], np.eye(n))
    else:
        Linv = ctx.preconditioner_matrix("symmetric")
        g = Linv @ rhs
        R = np.kron(g[None, :], Linv.T)
    R = sp.csr_matrix(R)
    R.eliminate_zeros()
    return R


def branch_coeff_net(ctx: BranchContext, rhs, eps_u: float | None, f_norm: float, mode: str = "symmetric",
                     eps_inv: float | None = None):
    """Encoded coefficient -> c_u with l2 error <= eps_u.  Returns (net, report).

    ``eps_inv`` overrides the inversion accuracy derived from eps_u.
    """
    n = ctx.n
    if eps_inv is None:
        if eps_u is None or not 0 < eps_u < 1:
            raise ValueError("eps_u must lie in (0, 1)")
        eps_inv = eps_u / (max(f_norm, 1e-300) * n ** 1.5 * ctx.C_A)
        eps_inv = min(eps_inv, 0.5)
    inv, rep = branch_inversion_net(ctx, eps_inv, mode)
    net = sparse_concat(affine_net(coefficient_readout(ctx, rhs, mode)), inv)
    rep.sizes["branch"] = net.size
    return net, rep
