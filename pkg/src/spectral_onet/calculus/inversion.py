"""Network approximating A -> (Id - A)^-1 for ||A||_2 <= 1 - delta.

The truncated Neumann series sum_{j < 2^K} A^j is evaluated by iterated
squaring: P_1 = Id + A, S_1 = A^2, then P_{k+1} = P_k + P_k S_k and
S_{k+1} = S_k^2.  Every stage is one parallel product block, stages are joined
by sparse concatenation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse as sp

from ..nn_core import Network, affine_net, sparse_concat
from .products import ApproxSpec, matmul_pairs, product_levels, product_stage, product_error


def m_terms(epsilon: float, delta: float) -> int:
    """Number of Neumann terms: ceil(log(eps delta / 2) / log(1 - delta))."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    ratio = math.log(0.5 * epsilon * delta) / math.log(1.0 - delta)
    # at delta = 2/(2+eps) the ratio is exactly 1; do not let rounding push it to 2
    return max(1, math.ceil(ratio - 1e-12))


def _propagate(tau: float, K: int, delta: float) -> float:
    """Spectral-norm error of the computed P_K when every matrix product has error <= tau."""
    if K <= 1:
        return 0.0
    r = 1.0 - delta
    e_p, e_s = 0.0, tau
    for k in range(2, K + 1):
        sig = r ** (2 ** (k - 1))
        pi = (1.0 - sig) / delta
        e_p, e_s = e_p * (1.0 + sig + e_s) + pi * e_s + tau, (2.0 * sig + e_s) * e_s + tau
    return e_p


@dataclass(frozen=True)
class InversionPlan:
    N: int
    epsilon: float
    delta: float
    m: int
    K: int
    matmuls: int
    tau: float          # spectral-norm error allowed per matrix product
    item_eps: float     # error allowed per scalar product
    levels: int
    bound: float

    def as_dict(self):
        return asdict(self)


def plan_inversion(N: int, spec: ApproxSpec) -> InversionPlan:
    eps, delta = spec.epsilon, spec.delta
    if delta is None:
        raise ValueError("inversion needs spec.delta")
    if eps >= 0.25:
        warnings.warn("inversion accuracy is only guaranteed by the theory for epsilon < 1/4", stacklevel=3)
    m = m_terms(min(eps, 0.999), delta)
    K = math.ceil(math.log2(m)) if m > 1 else 0
    bound = 1.0 / delta + 1.0
    if K <= 1:
        return InversionPlan(N, eps, delta, m, K, 0, 0.0, 0.0, 0, bound)
    # largest per-product error keeping the propagated error <= eps/2 (and all errors <= 1)
    target = min(0.5 * eps, 1.0)
    lo, hi = 0.0, target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _propagate(mid, K, delta) <= target:
            lo = mid
        else:
            hi = mid
    tau = lo
    item_eps = tau / (N * N)
    levels = product_levels(item_eps, bound)
    return InversionPlan(N, eps, delta, m, K, 2 * K - 2, tau, item_eps, levels, bound)


def inversion_net(N: int, spec: ApproxSpec, plan: InversionPlan | None = None) -> Network:
    """vec(A) -> approx vec((Id - A)^-1), column-major vec, A of size N x N."""
    plan = plan or plan_inversion(N, spec)
    n2 = N * N
    vec_id = np.eye(N).ravel(order="F")
    if plan.K == 0:
        return affine_net(sp.csr_matrix((n2, n2)), vec_id)
    if plan.K == 1:
        return affine_net(sp.identity(n2, format="csr"), vec_id)
    m, M = plan.levels, plan.bound
    I2 = sp.identity(n2, format="csr")
    Z2 = sp.csr_matrix((n2, n2))

    # stage 1: A -> (Id + A, A^2)
    pairs, S = matmul_pairs(N, N, N, 0, 0)
    net = product_stage(
        n2, pairs, m, M,
        combine=sp.vstack([sp.csr_matrix((n2, S.shape[1])), S]),
        carry=np.arange(n2), carry_combine=sp.vstack([I2, Z2]),
        bias=np.concatenate([vec_id, np.zeros(n2)]),
    )
    for k in range(2, plan.K + 1):
        ps_pairs, S_ps = matmul_pairs(N, N, N, 0, n2)
        if k < plan.K:
            ss_pairs, S_ss = matmul_pairs(N, N, N, n2, n2)
            stage = product_stage(
                2 * n2, np.vstack([ps_pairs, ss_pairs]), m, M,
                combine=sp.block_diag([S_ps, S_ss], format="csr"),
                carry=np.arange(n2), carry_combine=sp.vstack([I2, Z2]),
            )
        else:
            stage = product_stage(2 * n2, ps_pairs, m, M, combine=S_ps,
                                  carry=np.arange(n2), carry_combine=I2)
        net = sparse_concat(stage, net)
    return net


def size_shape(N: int, epsilon: float, delta: float) -> tuple[float, float]:
    """Depth and size shapes (1 + log m)(log(1/eps) + log m + log N) and m (1 + log^2 m) N^3 (...)."""
    m = m_terms(epsilon, delta)
    lg = math.log(1.0 / epsilon) + math.log(m) + math.log(N) + 1.0
    depth = (1.0 + math.log(m)) * lg
    size = m * (1.0 + math.log(m) ** 2) * N ** 3 * lg
    return depth, size


def check_admissible(A, delta: float, tol: float = 1e-12) -> bool:
    """Validation helper: ||A||_2 <= 1 - delta."""
    return bool(np.linalg.norm(np.asarray(A), 2) <= 1.0 - delta + tol)
