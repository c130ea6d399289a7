"""Polynomial emulation: Chebyshev trees, the periodic trunk basis and analytic maps.

Chebyshev polynomials of one variable s in [-1, 1] are produced level by level
with

    T_2k = 2 T_k^2 - 1,    T_2k+1 = 2 T_k T_k+1 - T_1,

so degree n needs ceil(log2 n) product stages.  Any polynomial of degree <= n
is then a fixed linear read-out of T_1..T_n.  Several variables are combined
with tensor-product stages.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Chebyshev, Legendre
from numpy.polynomial import chebyshev as C

from ..nn_core import Network, affine_net, concat, realize, sparse_concat
from .gradient import net_value_and_gradient
from .products import product_levels, product_stage

log = logging.getLogger(__name__)

T_BOUND = 1.125          # |T_k| <= 1 plus head room for approximation error


class ApproximationError(RuntimeError):
    pass


def _join(stage: Network, net: Network) -> Network:
    # an affine prefix is fused, deeper prefixes go through the sign-split identity
    return concat(stage, net) if net.depth == 1 else sparse_concat(stage, net)


def chebyshev_feature_net(in_W, in_b, degree: int, feat_coef, eta: float) -> Network:
    """Per-coordinate polynomial features.

    s = in_W y + in_b must lie in [-1, 1]^c.  Output c * n_feat values, coordinate
    major: feature f of coordinate j is sum_k feat_coef[f, k] T_k(s_j).
    """
    in_W = np.atleast_2d(np.asarray(in_W, float))
    n_c, n_in = in_W.shape
    feat_coef = np.atleast_2d(np.asarray(feat_coef, float))
    n_feat = feat_coef.shape[0]
    if feat_coef.shape[1] != degree + 1:
        raise ValueError("feature coefficients must have degree + 1 columns")
    net = affine_net(in_W, in_b)
    known = [1]
    levels = product_levels(eta, T_BOUND)
    while known[-1] < degree:
        n_cur = known[-1]
        new = list(range(n_cur + 1, min(2 * n_cur, degree) + 1))
        nk, nk2 = len(known), len(known) + len(new)
        pos = {k: i for i, k in enumerate(known)}
        pairs, rows, biases = [], [], np.zeros(n_c * nk2)
        cc_r, cc_c, cc_v = [], [], []
        for j in range(n_c):
            base = j * nk
            for i in range(nk):                      # carried values keep their slot
                cc_r.append(j * nk2 + i)
                cc_c.append(base + i)
                cc_v.append(1.0)
            for t, k in enumerate(new):
                row = j * nk2 + nk + t
                if k % 2 == 0:
                    h = k // 2
                    pairs.append((base + pos[h], base + pos[h]))
                    biases[row] = -1.0
                else:
                    pairs.append((base + pos[(k - 1) // 2], base + pos[(k + 1) // 2]))
                    cc_r.append(row)
                    cc_c.append(base + pos[1])
                    cc_v.append(-1.0)
                rows.append(row)
        n_items = len(pairs)
        combine = sp.csr_matrix((np.full(n_items, 2.0), (rows, np.arange(n_items))), shape=(n_c * nk2, n_items))
        # carry every current state entry (index = column of carry_combine)
        carry_combine = sp.csr_matrix((cc_v, (cc_r, cc_c)), shape=(n_c * nk2, n_c * nk))
        stage = product_stage(n_c * nk, pairs, levels, T_BOUND, combine, carry=np.arange(n_c * nk),
                              carry_combine=carry_combine, bias=biases)
        net = _join(stage, net)
        known = known + new
    nk = len(known)
    R = sp.kron(sp.identity(n_c), sp.csr_matrix(feat_coef[:, 1:nk + 1]), format="csr")
    b = np.tile(feat_coef[:, 0], n_c)
    return concat(affine_net(R, b), net)


def tensor_product_net(feature_net: Network, d: int, n_feat: int, eta: float, bound: float) -> Network:
    """All products prod_j F_j[f_j] over multi-indices f in {0..n_feat}^d minus 0.

    F_j[0] = 1; output order is the flat index f_1 + (n_feat+1) f_2 + ... minus one.
    ``bound`` bounds |F_j[f]|.
    """
    if d == 1:
        return feature_net
    base = n_feat + 1
    net = feature_net
    for t in range(2, d + 1):
        P = base ** (t - 1) - 1                 # partials over coords 1..t-1
        rest_in = (d - t + 1) * n_feat          # raw features of coords t..d
        n_in = P + rest_in
        P_new = base ** t - 1
        rest_out = (d - t) * n_feat
        n_out = P_new + rest_out
        pairs, prow = [], []
        cr, cc = [], []
        for flat in range(1, base ** t):
            g, ft = flat % base ** (t - 1), flat // base ** (t - 1)
            row = flat - 1
            if ft == 0:
                cr.append(row)
                cc.append(g - 1)
            elif g == 0:
                cr.append(row)
                cc.append(P + ft - 1)
            else:
                pairs.append((g - 1, P + ft - 1))
                prow.append(row)
        for r in range(rest_out):
            cr.append(P_new + r)
            cc.append(P + n_feat + r)
        carry = np.unique(cc)
        cmap = {c: i for i, c in enumerate(carry)}
        carry_combine = sp.csr_matrix((np.ones(len(cr)), (cr, [cmap[c] for c in cc])), shape=(n_out, carry.size))
        combine = sp.csr_matrix((np.ones(len(prow)), (prow, np.arange(len(prow)))), shape=(n_out, len(prow)))
        M = bound ** (t - 1) * T_BOUND
        stage = product_stage(n_in, pairs, product_levels(eta, M), M, combine, carry=carry,
                              carry_combine=carry_combine)
        net = _join(stage, net)
    return net


# ------------------------------------------------------------------ trunk basis

def periodic_chebyshev_coefficients(p: int) -> np.ndarray:
    """Rows: phi_1..phi_{p-1} of one variable in Chebyshev coefficients of s = 2x - 1."""
    from ..spectral.basis import periodic_1d_legendre_coefficients
    L = periodic_1d_legendre_coefficients(p)
    out = np.zeros((p - 1, p + 1))
    for k in range(1, p):
        c = Legendre(L[k]).convert(kind=Chebyshev).coef
        out[k - 1, :c.size] = c
    return out


@dataclass
class BasisNetInfo:
    p: int
    d: int
    eps_b: float
    eta: float
    refinements: int
    h1_error: float          # max over components
    mean_error: float        # max |integral of component|
    depth: int
    size: int


def _trunk(p, d, eta):
    feats = periodic_chebyshev_coefficients(p)
    fnet = chebyshev_feature_net(2.0 * np.eye(d), -np.ones(d), p, feats, eta)
    return tensor_product_net(fnet, d, p - 1, eta, bound=2.0 * T_BOUND)


def basis_h1_errors(net: Network, p: int, d: int, cells: int | None = None, order: int = 4,
                    chunk: int = 4096):
    """Per-component H1 errors and integrals of components on a composite Gauss grid."""
    from ..spectral.basis import PeriodicBasis
    from ..spectral.quadrature import gauss_legendre
    if cells is None:
        cells = {1: 1024, 2: 48, 3: 12}[d]
    quad = gauss_legendre(order, d, cells)
    basis = PeriodicBasis(d, p)
    sq = np.zeros(basis.n_b)
    mean = np.zeros(basis.n_b)
    for s in range(0, quad.n_q, chunk):
        pts, w = quad.nodes[s:s + chunk], quad.weights[s:s + chunk]
        v, g = net_value_and_gradient(net, pts)
        bv, bg = basis.eval(pts)
        sq += w @ (v - bv) ** 2 + np.einsum("n,nid->i", w, (g - bg) ** 2)
        mean += w @ v
    return np.sqrt(sq), np.abs(mean)


def build_poly_basis(p: int, d: int, eps_b: float, max_refine: int = 30):
    """Trunk net for phi_1..phi_{n_b} with max H1 error <= eps_b, checked a posteriori."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if not 0 < eps_b < 1:
        raise ValueError("eps_b must lie in (0, 1)")
    eta = (eps_b / (8.0 * p * p)) ** 2
    for r in range(max_refine):
        net = _trunk(p, d, eta)
        err, mean = basis_h1_errors(net, p, d)
        log.debug("poly basis p=%d d=%d eta=%.2e h1=%.3e", p, d, eta, err.max())
        if err.max() <= eps_b:
            return net, BasisNetInfo(p, d, eps_b, eta, r, float(err.max()), float(mean.max()), net.depth, net.size)
        eta /= 4.0
    raise ApproximationError(f"trunk basis did not reach H1 accuracy {eps_b}")


def poly_basis_net(p: int, d: int, eps_b: float) -> Network:
    return build_poly_basis(p, d, eps_b)[0]


def basis_size_shape(p: int, d: int, eps_b: float) -> float:
    nb = p ** d - 1
    le = abs(math.log(eps_b))
    return nb ** (2 / d) + nb ** (1 / d) * le + nb * (1 + math.log(nb) + le)


# ------------------------------------------------------------- analytic maps

def _lobatto_cheb_coefficients(values, n, dp):
    """Chebyshev tensor coefficients interpolating values on the Lobatto grid (axis order y_1..y_dp)."""
    nodes = np.cos(np.pi * np.arange(n + 1) / n)
    Vinv = np.linalg.inv(C.chebvander(nodes, n))
    c = values
    for ax in range(dp):
        c = np.moveaxis(np.tensordot(Vinv, np.moveaxis(c, ax, 0), axes=(1, 0)), 0, ax)
    return c


def _cheb_tensor_eval(coefs, S):
    """Evaluate sum c[k1..kd] prod T_kj(s_j) at S (n, dp); coefs (..., n+1, ..)."""
    dp = S.shape[1]
    n = coefs.shape[-1] - 1
    Vs = [C.chebvander(S[:, j], n) for j in range(dp)]
    letters = "abcdefgh"[:dp]
    spec = "z" + letters + "," + ",".join("n" + l for l in letters) + "->nz"
    return np.einsum(spec, coefs, *Vs)


@dataclass
class AnalyticNetInfo:
    degree: int
    eta: float
    poly_error: float
    net_error: float
    depth: int
    size: int


def build_analytic_approx(funcs, box, eps: float, n_samples: int = 10_000, seed: int = 0,
                          max_degree: int | None = None):
    """Network with max_i sup_P |f_i - component_i| <= eps on sampled points of the box."""
    box = np.atleast_2d(np.asarray(box, float))
    dp = box.shape[0]
    lo, hi = box[:, 0], box[:, 1]
    funcs = list(funcs)
    nf = len(funcs)
    if max_degree is None:
        max_degree = {1: 256, 2: 64}.get(dp, 16)
    rng = np.random.default_rng(seed)
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(dp, -1).T
    Y = np.vstack([rng.uniform(lo, hi, (n_samples, dp)), corners])
    S = (2.0 * Y - (lo + hi)) / (hi - lo)
    truth = np.stack([np.asarray(f(Y), float).reshape(-1) for f in funcs], axis=1)

    n = 1
    while True:
        nodes = np.cos(np.pi * np.arange(n + 1) / n)
        grid = np.meshgrid(*([nodes] * dp), indexing="ij")
        Sg = np.stack([g.ravel() for g in grid], axis=1)
        Yg = 0.5 * (Sg * (hi - lo) + (hi + lo))
        coefs = np.stack([
            _lobatto_cheb_coefficients(np.asarray(f(Yg), float).reshape((n + 1,) * dp), n, dp) for f in funcs])
        perr = np.abs(_cheb_tensor_eval(coefs, S) - truth).max()
        if perr <= eps / 2:
            break
        if 2 * n > max_degree:
            raise ApproximationError(f"Chebyshev interpolation did not reach {eps / 2} up to degree {n}")
        n *= 2

    in_W = np.diag(2.0 / (hi - lo))
    in_b = -(hi + lo) / (hi - lo)
    base = n + 1
    # readout over all multi-indices except 0, flat index k_1 + base k_2 + ...
    flat_coef = np.stack([c.ravel(order="F") for c in coefs])
    R, b0 = flat_coef[:, 1:], flat_coef[:, 0]
    scale = max(1.0, np.abs(R).sum(axis=1).max())
    eta = eps / (4.0 * scale)
    for _ in range(40):
        fnet = chebyshev_feature_net(in_W, in_b, n, np.eye(n + 1)[1:], eta)
        tnet = tensor_product_net(fnet, dp, n, eta, bound=T_BOUND)
        net = concat(affine_net(R, b0), tnet)
        nerr = np.abs(realize(net, Y) - truth).max()
        if nerr <= eps:
            return net, AnalyticNetInfo(n, eta, float(perr), float(nerr), net.depth, net.size)
        eta /= 4.0
    raise ApproximationError("network emulation of the Chebyshev interpolant did not reach eps")


def analytic_approx_net(funcs, box, eps: float, **kw) -> Network:
    return build_analytic_approx(funcs, box, eps, **kw)[0]
