"""Operator networks for parametric coefficients a(y)(x) = sum_i a_i(y) psi_i(x).

The encoder is the identity on y.  The branch first emulates the coefficient
functions a_i on the parameter box, maps them to the truncated coefficient at
the quadrature nodes with the matrix V[k, i] = psi_i(x_k) and then runs the
branch of an ordinary operator network built for slightly widened bounds.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy

from ..calculus.polynomials import build_analytic_approx
from ..calibration import calibrate_from_rows, pilot_errors
from ..nn_core import affine_net, concat
from ..problem import DEFAULT_REFERENCE_P, ProblemSpec
from ..spectral.coefficients import CoefficientField
from ..spectral.functions import ScalarFunction
from ..spectral.galerkin import galerkin_solve
from ..spectral.norms import error_norms
from ..spectral.quadrature import gauss_lobatto
from .build import Encoder, OperatorNet, _assemble_onet, make_plan

log = logging.getLogger(__name__)


class FamilyDecayError(ValueError):
    """The truncation tail does not decay, or never reaches its target."""


@dataclass(eq=False)
class ParametricFamily:
    """a(y) = sum_i coef_funcs[i](y) modes[i] for y in the box.

    ``coef_funcs`` take an (n, d_p) array and return n values.  ``a_min`` and
    ``a_max`` bound the full sum over the box and the domain.
    """

    d: int
    box: np.ndarray
    modes: list
    coef_funcs: list
    a_min: float
    a_max: float
    A_psi: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.box = np.atleast_2d(np.asarray(self.box, float))
        self.modes = [m if isinstance(m, ScalarFunction) else ScalarFunction.parse(str(m), self.d)
                      for m in self.modes]
        if len(self.modes) != len(self.coef_funcs) or not self.modes:
            raise ValueError("need one coefficient function per mode")
        if self.A_psi is None:
            pts = gauss_lobatto(16, self.d).nodes
            self.A_psi = float(max(np.abs(m.value(pts)).max() for m in self.modes))

    @property
    def d_p(self) -> int:
        return self.box.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def coefficient_values(self, Y) -> np.ndarray:
        """(n, n_modes) values a_i(y)."""
        Y = np.asarray(Y, float).reshape(-1, self.d_p)
        return np.stack([np.asarray(f(Y), float).reshape(-1) for f in self.coef_funcs], axis=1)

    def coefficient(self, y, n_modes: int | None = None) -> CoefficientField:
        n = self.n_modes if n_modes is None else n_modes
        vals = self.coefficient_values(y)[0, :n]
        expr = sum((sympy.Float(float(v)) * m.expr for v, m in zip(vals, self.modes[:n])), sympy.Integer(0))
        return CoefficientField(d=self.d, a_min=self.a_min, a_max=self.a_max, a=ScalarFunction(expr, self.d),
                                meta={"family": "parametric", "y": np.atleast_1d(y).tolist()})

    def grid(self, n_per_axis: int = 21) -> np.ndarray:
        axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in self.box]
        return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)

    def tails(self, Y, X) -> np.ndarray:
        """tails[n] = sup over (y, x) of |sum_{i >= n} a_i(y) psi_i(x)|, n = 0..n_modes."""
        C = self.coefficient_values(Y)                                  # (ny, m)
        P = np.stack([m.value(X) for m in self.modes], axis=1)          # (nx, m)
        out = np.zeros(self.n_modes + 1)
        for n in range(self.n_modes):
            out[n] = np.abs(C[:, n:] @ P[:, n:].T).max()
        return out


def cosine_family(a0: float = 2.0, amp: float = 1.0) -> ParametricFamily:
    """a(y)(x) = a0 + y cos(2 pi x), y in [-amp, amp]."""
    return ParametricFamily(
        d=1, box=[[-amp, amp]],
        modes=["1", "cos(2*pi*x1)"],
        coef_funcs=[lambda Y: np.full(len(Y), a0), lambda Y: Y[:, 0]],
        a_min=a0 - amp, a_max=a0 + amp,
        meta={"name": "cosine", "a0": a0, "amp": amp})


def lipschitz_estimate(coefs, f, p: int, scales=(1e-2, 1e-3), perturbations=None) -> float:
    """max ||u^{a + t eta} - u^a||_H1 / (t ||eta||_inf) over the given coefficients and perturbations."""
    d = coefs[0].d
    if perturbations is None:
        perturbations = [ScalarFunction.parse(e, d) for e in
                         (["1", "cos(2*pi*x1)", "sin(2*pi*x1)"] if d == 1 else
                          ["1", "cos(2*pi*x1)", "sin(2*pi*x2)", "cos(2*pi*(x1 + x2))"])]
    pts = gauss_lobatto(32, d).nodes
    worst = 0.0
    for a in coefs:
        u0 = galerkin_solve(a, f, p)
        for eta in perturbations:
            sup = float(np.abs(eta.value(pts)).max())
            for t in scales:
                pert = CoefficientField(d=d, a_min=a.a_min * 0.5, a_max=a.a_max + t * sup,
                                        a=a.a + eta * ScalarFunction.constant(t, d))
                h1 = error_norms(u0, galerkin_solve(pert, f, p), d=d)[1]
                worst = max(worst, h1 / (t * sup))
    return worst


@dataclass
class ParametricReport:
    L_hat: float
    n_p: int
    tails: list
    tail: float
    eps_p: float
    widened_bounds: tuple
    min_truncated: float
    analytic: dict
    inner: dict = field(default_factory=dict)


def build_parametric_onet(family: ParametricFamily, f, eps: float, seed: int = 0,
                          n_pilot: int = 7, p_override: int | None = None) -> OperatorNet:
    """Operator net y -> u^{a(y)} with target H1 accuracy eps over the box."""
    t0 = time.perf_counter()
    d = family.d
    if isinstance(f, str):
        f = ScalarFunction.parse(f, d)
    Y_test = family.grid(21 if family.d_p == 1 else 7)
    X_test = gauss_lobatto(24, d).nodes
    rng = np.random.default_rng(seed)
    lo, hi = family.box[:, 0], family.box[:, 1]
    Y_pilot = np.vstack([np.linspace(lo, hi, n_pilot), rng.uniform(lo, hi, (2, family.d_p))])
    pilot = [family.coefficient(y) for y in Y_pilot]

    p_lip = {1: 16, 2: 8, 3: 5}[d]
    L_hat = lipschitz_estimate(pilot[:: max(1, len(pilot) // 4)], f, p_lip)

    tails = family.tails(Y_test, X_test)
    target = min(eps / (3.0 * L_hat), family.a_min / 2.0)
    if np.any(np.diff(tails) > 1e-12 * max(1.0, tails[0])):
        raise FamilyDecayError(f"truncation tails do not decrease: {tails.tolist()}")
    ok = np.nonzero(tails <= target)[0]
    if len(ok) == 0:
        raise FamilyDecayError(f"tail {tails[-1]} never reaches {target}")
    n_p = max(1, int(ok[0]))
    tail = float(tails[n_p])

    A_psi = family.A_psi
    eps_p = min(eps / (3.0 * L_hat), family.a_min / 4.0) / (n_p * A_psi)
    lo_b = family.a_min - tail - n_p * eps_p * A_psi
    V_test = np.stack([m.value(X_test) for m in family.modes[:n_p]], axis=1)
    trunc = V_test @ family.coefficient_values(Y_test)[:, :n_p].T
    if trunc.min() < family.a_min / 2.0:
        raise FamilyDecayError(f"truncated coefficient drops to {trunc.min()} < a_min/2")
    hi_b = family.a_max + tail + n_p * eps_p * A_psi

    # inner operator net for the widened class, target eps/3
    rows, sup_u = pilot_errors([family.coefficient(y, n_p) for y in Y_pilot], f,
                               range(2, {1: 21, 2: 11, 3: 7}[d]),
                               lambda c: galerkin_solve(c, f, DEFAULT_REFERENCE_P[d]))
    cal = calibrate_from_rows(rows, sup_u)
    plan = make_plan(d, eps / 3.0, cal, (lo_b, hi_b), p_override=p_override)
    inner = _assemble_onet("scalar", d, f, plan, (lo_b, hi_b))

    funcs = [(lambda Y, g=g: g(np.asarray(Y, float).reshape(-1, family.d_p))) for g in family.coef_funcs[:n_p]]
    analytic, ainfo = build_analytic_approx(funcs, family.box, eps_p, seed=seed)
    nodes = inner.encoder.points
    V = np.stack([m.value(nodes) for m in family.modes[:n_p]], axis=1)     # (n_q, n_p)
    coef_net = concat(affine_net(V), analytic)
    branch = concat(inner.branch, coef_net)

    emulated = np.stack([np.asarray(coef_net(y)) for y in Y_test], axis=1)
    min_trunc = float(min(trunc.min(), emulated.min()))
    if min_trunc < family.a_min / 2.0:
        raise FamilyDecayError(f"emulated coefficient drops to {min_trunc} < a_min/2")

    rep = ParametricReport(L_hat, n_p, tails.tolist(), tail, eps_p, (lo_b, hi_b), min_trunc, asdict(ainfo),
                           inner.report)
    report = {"kind": "parametric", "eps": eps, "parametric": asdict(rep), "calibration": cal.as_dict(),
              "branch": {"size": branch.size, "depth": branch.depth},
              "trunk": inner.report["trunk"], "seconds": time.perf_counter() - t0}
    enc = Encoder("parametric", None, family.d_p)
    return OperatorNet(enc, branch, inner.trunk, report)
