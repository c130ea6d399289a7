"""Operator networks: encoder + branch + trunk, their budgets and bundles."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..calculus.gradient import net_value_and_gradient
from ..calculus.polynomials import build_poly_basis
from ..calibration import Calibration, p_of_eps
from ..nn_core import Network, affine_net, concat, load_network, realize, save_network
from ..spectral.basis import PeriodicBasis
from ..spectral.galerkin import _eval
from ..spectral.quadrature import gauss_legendre, gauss_lobatto
from .branch import branch_coeff_net, rd_context, scalar_context

log = logging.getLogger(__name__)


class PlanError(ValueError):
    pass


# ------------------------------------------------------------------ encoder

@dataclass(eq=False)
class Encoder:
    """Point evaluations at the quadrature nodes (or the parameter itself)."""

    kind: str                      # "scalar", "rd" or "parametric"
    points: np.ndarray | None
    d: int

    def encode(self, coef) -> np.ndarray:
        if self.kind == "parametric":
            return np.atleast_1d(np.asarray(coef, dtype=float))
        if self.kind == "scalar":
            return np.asarray(coef.values(self.points), dtype=float)
        A = coef.values(self.points)                           # (n_q, d, d)
        if np.max(np.abs(A - np.swapaxes(A, 1, 2))) > 1e-12:
            raise ValueError("matrix coefficient samples are not symmetric")
        vecs = np.swapaxes(A, 1, 2).reshape(len(self.points), -1)   # column-major vec per node
        return np.concatenate([vecs.ravel(), coef.reaction(self.points)])

    @property
    def dim(self) -> int:
        if self.kind == "parametric":
            return self.d
        n = len(self.points)
        return n if self.kind == "scalar" else n * self.d ** 2 + n

    def to_dict(self):
        return {"kind": self.kind, "d": self.d,
                "points": None if self.points is None else self.points.tolist()}

    @classmethod
    def from_dict(cls, doc):
        pts = None if doc["points"] is None else np.asarray(doc["points"], float)
        return cls(doc["kind"], pts, int(doc["d"]))


# ------------------------------------------------------------------ plan

@dataclass
class BuildPlan:
    d: int
    p: int
    q: int
    n_b: int
    n_q: int
    eps: float | None = None
    eps_G: float | None = None
    eps_u: float | None = None
    eps_b: float | None = None
    eps_inv: float | None = None
    alpha: float | None = None
    delta: float | None = None
    bounds: tuple | None = None
    C_G: float | None = None
    b_G: float | None = None
    C_pol: float | None = None
    sup_u: float | None = None
    trunk_factor: float = 1.0
    preconditioner: str = "symmetric"

    def as_dict(self):
        return asdict(self)


def _budget(eps, n, p, d, sup_u):
    C_pol = 4.0 * math.sqrt(d)
    eps_u = eps / (3.0 * math.sqrt(1.0 + C_pol ** 2 * n ** (4.0 / d)) * math.sqrt(n))
    # coefficient l2 norms are bounded by (2p+1)^{d/2} times the L2 norm; the
    # factor below covers the part of that constant not already in n_b
    trunk_factor = max(1.0, (2 * p + 1) ** (d / 2) / math.sqrt(n))
    eps_b = eps / (3.0 * n * (2.0 + sup_u) * trunk_factor)
    return C_pol, eps_u, eps_b, trunk_factor


def make_plan(d: int, eps: float, calibration: Calibration, bounds, extended: bool = False,
              preconditioner: str = "symmetric", p_override: int | None = None) -> BuildPlan:
    """Budget split for target eps: eps_G = eps/3, eps_u and eps_b from the error decomposition."""
    if not 0 < eps:
        raise PlanError("eps must be positive")
    p = p_override or p_of_eps(eps, calibration.C_G, calibration.b_G)
    q = p + 1
    n = p ** d - 1 + int(extended)
    C_pol, eps_u, eps_b, tf = _budget(eps, n, p, d, calibration.sup_u)
    c, C = bounds
    alpha = 1.0 / (c + C)
    plan = BuildPlan(d, p, q, n, q ** d, eps, eps / 3.0, eps_u, eps_b, None, alpha, alpha * c, tuple(bounds),
                     calibration.C_G, calibration.b_G, C_pol, calibration.sup_u, tf, preconditioner)
    for name in ("eps_G", "eps_u", "eps_b"):
        v = getattr(plan, name)
        if not 0 < v < 1:
            raise PlanError(f"{name} = {v} is outside (0, 1); use a smaller eps or explicit parameters")
    if not alpha * C < 1:
        raise PlanError("alpha * C_cont must be below 1")
    return plan


def explicit_plan(d: int, p: int, q: int | None, eps_inv: float, eps_b: float, bounds,
                  extended: bool = False, preconditioner: str = "symmetric") -> BuildPlan:
    q = p + 1 if q is None else q
    n = p ** d - 1 + int(extended)
    c, C = bounds
    alpha = 1.0 / (c + C)
    for name, v in (("eps_inv", eps_inv), ("eps_b", eps_b)):
        if not 0 < v < 1:
            raise PlanError(f"{name} must lie in (0, 1)")
    return BuildPlan(d, p, q, n, q ** d, eps_inv=eps_inv, eps_b=eps_b, alpha=alpha, delta=alpha * c,
                     bounds=tuple(bounds), preconditioner=preconditioner)


# ------------------------------------------------------------------ the operator net

class NetworkField:
    """u(x) = branch_vector . trunk(x), with the exact piecewise-linear gradient."""

    def __init__(self, branch_vector, trunk: Network):
        self.branch_vector = np.asarray(branch_vector, dtype=float)
        self.trunk = trunk
        self.d = trunk.input_dim

    def value(self, points):
        pts = np.asarray(points, float).reshape(-1, self.d)
        return realize(self.trunk, pts) @ self.branch_vector

    def gradient(self, points, chunk: int = 2048):
        pts = np.asarray(points, float).reshape(-1, self.d)
        out = np.empty((len(pts), self.d))
        for s in range(0, len(pts), chunk):
            _, J = net_value_and_gradient(self.trunk, pts[s:s + chunk])
            out[s:s + chunk] = np.einsum("noi,o->ni", J, self.branch_vector)
        return out

    def scaled(self, factor: float) -> "NetworkField":
        return NetworkField(factor * self.branch_vector, self.trunk)


@dataclass(eq=False)
class OperatorNet:
    encoder: Encoder
    branch: Network
    trunk: Network
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.branch.output_dim != self.trunk.output_dim:
            raise ValueError("branch and trunk output dimensions differ")

    def branch_vector(self, coef) -> np.ndarray:
        return realize(self.branch, self.encoder.encode(coef))

    def branch_vectors(self, coefs) -> np.ndarray:
        X = np.stack([self.encoder.encode(c) for c in coefs])
        return realize(self.branch, X)

    def field(self, coef) -> NetworkField:
        return NetworkField(self.branch_vector(coef), self.trunk)

    def __call__(self, coef, x):
        return eval_onet(self, coef, x)

    # bundle
    def save(self, directory) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        save_network(self.branch, out / "branch.json")
        save_network(self.trunk, out / "trunk.json")
        meta = {"encoder": self.encoder.to_dict(), "report": _jsonable(self.report)}
        (out / "meta.json").write_text(json.dumps(meta, indent=1, allow_nan=False))
        return out

    @classmethod
    def load(cls, directory) -> "OperatorNet":
        src = Path(directory)
        meta = json.loads((src / "meta.json").read_text())
        return cls(Encoder.from_dict(meta["encoder"]), load_network(src / "branch.json"),
                   load_network(src / "trunk.json"), meta["report"])


def eval_onet(onet: OperatorNet, coef, x):
    """Inner product of the branch output for coef with the trunk output at x."""
    f = onet.field(coef)
    x = np.asarray(x, float)
    v = f.value(x.reshape(-1, f.d))
    return float(v[0]) if x.ndim <= 1 and x.size == f.d else v


def eval_field(onet: OperatorNet, coef) -> NetworkField:
    return onet.field(coef)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ------------------------------------------------------------------ builders

def load_vector(basis: PeriodicBasis, f, q_f: int) -> np.ndarray:
    fq = gauss_lobatto(q_f, basis.d)
    return basis.values(fq.nodes).T @ (fq.weights * _eval(f, fq.nodes))


def l2_norm(f, d: int) -> float:
    quad = gauss_legendre(24, d, cells=2 if d < 3 else 1)
    return float(np.sqrt(quad.weights @ _eval(f, quad.nodes) ** 2))


def _with_constant_output(trunk: Network) -> Network:
    """Append the constant function 1 as an extra output."""
    n = trunk.output_dim
    M = sp.vstack([sp.identity(n, format="csr"), sp.csr_matrix((1, n))], format="csr")
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return concat(affine_net(M, b), trunk)


def _assemble_onet(kind, d, f, plan: BuildPlan, family_bounds):
    t0 = time.perf_counter()
    basis = PeriodicBasis(d, plan.p, extended=(kind == "rd"))
    quad = gauss_lobatto(plan.q, d)
    ctx = scalar_context(basis, quad, family_bounds) if kind == "scalar" else rd_context(basis, quad, family_bounds)
    rhs = load_vector(ctx.basis, f, plan.q + 4)
    f_norm = l2_norm(f, d)
    branch, brep = branch_coeff_net(ctx, rhs, eps_u=plan.eps_u, f_norm=f_norm, eps_inv=plan.eps_inv,
                                    mode=plan.preconditioner)
    t1 = time.perf_counter()
    trunk, tinfo = build_poly_basis(plan.p, d, plan.eps_b)
    if kind == "rd":
        trunk = _with_constant_output(trunk)
    t2 = time.perf_counter()
    report = {
        "kind": kind,
        "plan": plan.as_dict(),
        "n_b": ctx.n, "n_q": quad.n_q,
        "C_A": ctx.C_A, "f_norm": f_norm,
        "branch": {"size": branch.size, "depth": branch.depth, **asdict(brep)},
        "trunk": {"size": trunk.size, "depth": trunk.depth, **asdict(tinfo)},
        "input_layer_size": int(ctx.input_weights.nnz),
        "seconds": {"branch": t1 - t0, "trunk": t2 - t1},
    }
    enc = Encoder("scalar" if kind == "scalar" else "rd", quad.nodes.copy(), d)
    return OperatorNet(enc, branch, trunk, report)


def build_onet(problem, plan: BuildPlan) -> OperatorNet:
    """ONet for the scalar diffusion problem; plan from make_plan or explicit_plan."""
    if problem.kind != "scalar":
        raise ValueError("use build_rd_onet for matrix+reaction coefficients")
    return _assemble_onet("scalar", problem.d, problem.source, plan, problem.bounds)


def build_rd_onet(problem, plan: BuildPlan) -> OperatorNet:
    """ONet for -div(A grad u) + c u = f over the basis extended by the constant."""
    if problem.kind == "scalar":
        raise ValueError("build_rd_onet needs a matrix+reaction coefficient")
    coef = problem.coefficient
    return _assemble_onet("rd", problem.d, problem.source, plan, (coef.coercivity, coef.continuity))
