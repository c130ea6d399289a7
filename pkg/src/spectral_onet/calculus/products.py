"""Approximate multiplication with ReLU networks.

The square t -> t^2 on [0, 1] is approximated by the piecewise linear
interpolant on a grid of width 2^-m, written as t - sum_s g_s(t) / 4^s with
g the hat function (the sawtooth construction).  The interpolant lies above
t^2 and misses it by at most 4^-(m+1).

Products use polarization with two squares,

    xy = M^2 (((x + y) / 2M)^2 - ((x - y) / 2M)^2),

so both channels carry the same error sign and a product of two exact zeros
cancels exactly.  All product items of one stage run in parallel and share
depth m + 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..nn_core import Network


@dataclass(frozen=True)
class ApproxSpec:
    epsilon: float
    bound: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon):
            raise ValueError("epsilon must be positive")
        if not self.bound > 0:
            raise ValueError("bound must be positive")
        if self.delta is not None and not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")


def product_error(levels: int, bound: float) -> float:
    """Worst-case error of one product or square item."""
    return bound * bound * 4.0 ** (-(levels + 1))


def product_levels(eps: float, bound: float) -> int:
    """Smallest number of sawtooth levels with product_error <= eps."""
    m = max(1, math.ceil(0.5 * math.log2(bound * bound / eps) - 1.0))
    while product_error(m, bound) > eps:
        m += 1
    while m > 1 and product_error(m - 1, bound) <= eps:
        m -= 1
    return m


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))), shape=shape)


def product_stage(n_in: int, pairs, levels: int, bound: float, combine, carry=None,
                  carry_combine=None, bias=None) -> Network:
    """Parallel block of approximate products followed by a linear read-out.

    pairs:    (n_items, 2) input indices; a pair (i, i) is a square.
    combine:  (n_out, n_items) matrix applied to the item values.
    carry:    input indices passed through exactly, read out by carry_combine.
    Output is combine @ items + carry_combine @ x[carry] + bias, depth levels + 2.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    carry = np.asarray([] if carry is None else carry, dtype=np.int64)
    combine = sp.csr_matrix(combine)
    n_out = combine.shape[0]
    K = carry.size
    if carry_combine is None:
        carry_combine = sp.csr_matrix((n_out, K))
    carry_combine = sp.csr_matrix(carry_combine)
    if combine.shape[1] != pairs.shape[0] or carry_combine.shape != (n_out, K):
        raise ValueError("read-out shapes do not match items/carry")
    m = int(levels)
    M = float(bound)

    # channels: two per product, one per square
    sq = pairs[:, 0] == pairs[:, 1]
    n_ch_item = np.where(sq, 1, 2)
    C = int(n_ch_item.sum())
    item_of = np.repeat(np.arange(pairs.shape[0]), n_ch_item)
    first = np.concatenate([[0], np.cumsum(n_ch_item)[:-1]])
    local = np.arange(C) - first[item_of]
    ch_sq = sq[item_of]
    ci = pairs[item_of, 0]
    cj = pairs[item_of, 1]
    scale = np.where(ch_sq, 1.0 / M, 0.5 / M)
    coef = np.where(ch_sq, M * M, np.where(local == 0, M * M, -M * M))
    sign_j = np.where(local == 0, 1.0, -1.0)

    ch = np.arange(C)
    # layer 1: u+ = relu(z), u- = relu(-z), plus carry split
    r = [ch, C + ch]
    c = [ci, ci]
    v = [np.ones(C), -np.ones(C)]
    nsq = ~ch_sq
    r += [ch[nsq], C + ch[nsq]]
    c += [cj[nsq], cj[nsq]]
    v += [sign_j[nsq], -sign_j[nsq]]
    kk = np.arange(K)
    r += [2 * C + kk, 2 * C + K + kk]
    c += [carry, carry]
    v += [np.ones(K), -np.ones(K)]
    W1 = _coo(np.concatenate(r), np.concatenate(c), np.concatenate(v), (2 * C + 2 * K, n_in))
    b1 = np.zeros(2 * C + 2 * K)

    carry_id = sp.identity(2 * K, format="csr")

    # layer 2: p = relu(t), q = relu(t - 1/2), t = s (u+ + u-)
    r = np.concatenate([ch, ch, C + ch, C + ch])
    c = np.concatenate([ch, C + ch, ch, C + ch])
    v = np.concatenate([scale, scale, scale, scale])
    W2 = sp.block_diag([_coo(r, c, v, (2 * C, 2 * C)), carry_id], format="csr")
    b2 = np.concatenate([np.zeros(C), np.full(C, -0.5), np.zeros(2 * K)])

    ws, bs = [W1, W2], [b1, b2]
    # hidden levels s = 1..m-1 with layout [acc | p | q]
    for s in range(1, m):
        fac = 4.0 ** (-s)
        if s == 1:
            # previous layout [p | q], acc_0 = p
            P, Q = 0, C
            ncol = 2 * C
            r = [ch, ch]
            c = [P + ch, Q + ch]
            v = [np.full(C, 1.0 - 2.0 * fac), np.full(C, 4.0 * fac)]
        else:
            A, P, Q = 0, C, 2 * C
            ncol = 3 * C
            r = [ch, ch, ch]
            c = [A + ch, P + ch, Q + ch]
            v = [np.ones(C), np.full(C, -2.0 * fac), np.full(C, 4.0 * fac)]
        r += [C + ch, C + ch, 2 * C + ch, 2 * C + ch]
        c += [P + ch, Q + ch, P + ch, Q + ch]
        v += [np.full(C, 2.0), np.full(C, -4.0), np.full(C, 2.0), np.full(C, -4.0)]
        core = _coo(np.concatenate(r), np.concatenate(c), np.concatenate(v), (3 * C, ncol))
        ws.append(sp.block_diag([core, carry_id], format="csr"))
        bs.append(np.concatenate([np.zeros(2 * C), np.full(C, -0.5), np.zeros(2 * K)]))

    # read-out: item value = sum_c coef_c (acc - (2p - 4q) / 4^m)
    fac = 4.0 ** (-m)
    if m == 1:
        cols = [ch, C + ch]
        vals = [coef * (1.0 - 2.0 * fac), coef * 4.0 * fac]
        width = 2 * C
    else:
        cols = [ch, C + ch, 2 * C + ch]
        vals = [coef, coef * (-2.0 * fac), coef * 4.0 * fac]
        width = 3 * C
    G = _coo(np.concatenate([item_of] * len(cols)), np.concatenate(cols), np.concatenate(vals),
             (pairs.shape[0], width))
    WL = sp.hstack([combine @ G, carry_combine, -carry_combine], format="csr")
    bL = np.zeros(n_out) if bias is None else np.asarray(bias, float)
    ws.append(WL)
    bs.append(bL)
    return Network(n_in, tuple(ws), tuple(bs))


def product_net(spec: ApproxSpec) -> Network:
    """(x, y) -> xy with error <= spec.epsilon for |x|, |y| <= spec.bound."""
    m = product_levels(spec.epsilon, spec.bound)
    return product_stage(2, [[0, 1]], m, spec.bound, sp.csr_matrix(np.ones((1, 1))))


def square_net(spec: ApproxSpec) -> Network:
    """x -> x^2 with error <= spec.epsilon for |x| <= spec.bound."""
    m = product_levels(spec.epsilon, spec.bound)
    return product_stage(1, [[0, 0]], m, spec.bound, sp.csr_matrix(np.ones((1, 1))))


def matmul_pairs(n: int, m: int, l: int, offset_b: int = 0, offset_c: int | None = None):
    """Item pairs and summation matrix for vec(BC) with column-major vec.

    B is n x m at offset_b, C is m x l at offset_c of the input vector.  Items
    are ordered by output entry, then by the summation index.
    """
    if offset_c is None:
        offset_c = offset_b + n * m
    i, j, k = np.meshgrid(np.arange(n), np.arange(l), np.arange(m), indexing="ij")
    # output index o = i + n j, items ordered (o, k)
    o = (i + n * j)
    order = np.lexsort((k.ravel(), o.ravel()))
    i, j, k, o = i.ravel()[order], j.ravel()[order], k.ravel()[order], o.ravel()[order]
    pairs = np.stack([offset_b + i + n * k, offset_c + k + m * j], axis=1)
    S = sp.csr_matrix((np.ones(o.size), (o, np.arange(o.size))), shape=(n * l, o.size))
    return pairs, S


def matmul_net(n: int, m: int, l: int, spec: ApproxSpec) -> Network:
    """[vec(B); vec(C)] -> vec(BC), entrywise error <= spec.epsilon for entries bounded by spec.bound."""
    eta = spec.epsilon / m
    levels = product_levels(eta, spec.bound)
    pairs, S = matmul_pairs(n, m, l)
    return product_stage(n * m + m * l, pairs, levels, spec.bound, S)
