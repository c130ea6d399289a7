"""Convergence, calibration, inversion, size-scaling, Lipschitz and parametric studies.

Studies never raise on a failed cell: the failure is recorded in the report
and the sweep goes on.
"""
from __future__ import annotations

import gc
import logging
import math
import zlib

import numpy as np

from ..calculus.inversion import inversion_net, plan_inversion
from ..calculus.products import ApproxSpec
from ..calibration import Calibration, CalibrationError, calibrate, fit_exponential, p_of_eps
from ..nn_core import realize
from ..onet.build import build_onet, build_rd_onet, make_plan
from ..onet.parametric import build_parametric_onet, cosine_family
from ..spectral.basis import PeriodicBasis
from ..spectral.coefficients import CoefficientField
from ..spectral.functions import ScalarFunction
from ..spectral.galerkin import assemble, galerkin_solve, spectrum_bounds
from ..spectral.norms import error_norms
from ..spectral.quadrature import gauss_lobatto
from .report import StudyReport, environment

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["p", "q", "n_b", "n_q", "l2_error", "h1_error", "lambda_min", "lambda_max"]


def study_stream(seed: int, name: str) -> np.random.SeedSequence:
    """Per-study random stream derived from the global seed."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(name.encode()),))


def _loglog_slope(x, y) -> float:
    A = np.stack([np.ones(len(x)), np.log(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[1])


# ------------------------------------------------------------------ convergence

def convergence_study(problem, p_range, q_rule=None, seed: int = 0) -> StudyReport:
    """Galerkin errors for the problem's fixed coefficient, with an exponential fit."""
    q_rule = q_rule or (lambda p: p + 1)
    p_range = [int(p) for p in p_range]
    rep = StudyReport("convergence", list(CONVERGENCE_COLUMNS), grid={"p": p_range, "problem": problem.name},
                      env=environment(seed), plot={"x": "p", "y": ["h1_error", "l2_error"], "logy": True})
    coef = problem.coefficient
    exact = problem.reference(coef)
    for p in p_range:
        try:
            basis = PeriodicBasis(problem.d, p)
            quad = gauss_lobatto(q_rule(p), problem.d)
            sys = assemble(coef, basis, quad, problem.source)
            l2, h1 = error_norms(exact, sys.field(), d=problem.d)
            lo, hi = spectrum_bounds(sys, check=False)
            rep.add_row(p=p, q=quad.q, n_b=sys.basis.size, n_q=quad.n_q, l2_error=l2, h1_error=h1,
                        lambda_min=lo, lambda_max=hi)
        except Exception as exc:        # a failed cell must not end the sweep
            rep.failures.append(f"p={p}: {type(exc).__name__}: {exc}")
    if len(rep.rows) < 2:
        rep.failures.append("fewer than two orders: the exponential fit is underdetermined")
        return rep
    ps, h1 = rep.column("p"), rep.column("h1_error")
    if np.any(np.diff(h1) >= 0):
        rep.failures.append("H1 error does not decrease monotonically over the p range")
    try:
        fit = fit_exponential(ps, h1)
    except CalibrationError as exc:
        rep.failures.append(str(exc))
        return rep
    rep.fits = {"b_G": fit.slope, "log_C_G": fit.log_c, "C_G": math.exp(fit.log_c), "residual": fit.residual,
                "span": fit.span, "relative_residual": fit.relative_residual}
    if fit.slope <= 0:
        rep.failures.append(f"fitted rate b_G = {fit.slope} is not positive")
    if fit.relative_residual > 0.2:
        rep.failures.append(f"fit residual {fit.relative_residual:.3f} exceeds 20% of the error range")
    return rep


def calibration_study(problem, p_range=None, n_family: int = 6, seed: int = 0):
    """Returns (Calibration or None, StudyReport)."""
    rep = StudyReport("calibration", ["p", "h1_sup"], env=environment(seed),
                      plot={"x": "p", "y": ["h1_sup"], "logy": True})
    try:
        cal = calibrate(problem, p_range, n_family=n_family, seed=study_stream(seed, "calibration"))
    except CalibrationError as exc:
        rep.failures.append(str(exc))
        return None, rep
    for p, e in cal.pilot:
        rep.add_row(p=p, h1_sup=e)
    rep.fits = {"C_G": cal.C_G, "b_G": cal.b_G, "sup_u": cal.sup_u,
                "p_of_eps": {str(e): p_of_eps(e, cal.C_G, cal.b_G) for e in (1e-1, 3e-2, 1e-2, 3e-3)}}
    return cal, rep


# ------------------------------------------------------------------ inversion

def random_admissible(N: int, delta: float, rng, n: int) -> list[np.ndarray]:
    """Random matrices with ||A||_2 <= 1 - delta; the first quarter sit on the boundary."""
    out = []
    for k in range(n):
        G = rng.standard_normal((N, N))
        if k % 2:
            G = 0.5 * (G + G.T)
        s = 1.0 if k < n // 4 else rng.uniform(0.0, 1.0)
        out.append(G * (s * (1.0 - delta) / max(np.linalg.norm(G, 2), 1e-300)))
    return out


def invnet_study(N_range=(1, 2, 4, 8), eps_range=(1e-1, 1e-2, 1e-3), deltas=(0.25, 0.5),
                 n_samples: int = 100, seed: int = 0) -> StudyReport:
    cols = ["N", "delta", "eps", "samples", "max_error", "max_norm", "norm_bound", "m", "K", "size", "depth"]
    rep = StudyReport("inversion", cols, grid={"N": list(N_range), "eps": list(eps_range), "delta": list(deltas)},
                      env=environment(seed), plot={"x": "N", "y": ["size"], "group": "eps", "logx": True})
    rng = np.random.default_rng(study_stream(seed, "inversion"))
    for delta in deltas:
        for eps in eps_range:
            for N in N_range:
                try:
                    spec = ApproxSpec(eps, 1.0, delta)
                    plan = plan_inversion(N, spec)
                    net = inversion_net(N, spec, plan)
                    mats = random_admissible(N, delta, rng, n_samples)
                    out = realize(net, np.stack([A.ravel(order="F") for A in mats]))
                    errs, norms = [], []
                    for A, o in zip(mats, out):
                        M = o.reshape(N, N, order="F")
                        errs.append(np.linalg.norm(np.linalg.inv(np.eye(N) - A) - M, 2))
                        norms.append(np.linalg.norm(M, 2))
                    me, mn = max(errs), max(norms)
                    rep.add_row(N=N, delta=delta, eps=eps, samples=n_samples, max_error=me, max_norm=mn,
                                norm_bound=eps + 1.0 / delta, m=plan.m, K=plan.K, size=net.size, depth=net.depth)
                    if me > eps:
                        rep.failures.append(f"N={N} delta={delta} eps={eps}: error {me:.3e} > eps")
                    if mn > eps + 1.0 / delta:
                        rep.failures.append(f"N={N} delta={delta} eps={eps}: output norm {mn:.3e} > eps + 1/delta")
                    del net
                except Exception as exc:
                    rep.failures.append(f"N={N} delta={delta} eps={eps}: {type(exc).__name__}: {exc}")
    # growth exponents: log size against log N and log|log eps|, per delta, over nontrivial cells
    fits = {}
    for delta in deltas:
        rows = [r for r in rep.rows if r["delta"] == delta and r["size"] > 0 and r["N"] > 1]
        if len({r["N"] for r in rows}) < 2 or len({r["eps"] for r in rows}) < 2:
            continue
        A = np.array([[1.0, math.log(r["N"]), math.log(abs(math.log(r["eps"])))] for r in rows])
        (c0, eN, eE), *_ = np.linalg.lstsq(A, np.log([r["size"] for r in rows]), rcond=None)
        fits[str(delta)] = {"exp_N": float(eN), "exp_log_eps": float(eE)}
        if eN > 3.25:
            rep.failures.append(f"delta={delta}: size exponent in N {eN:.2f} > 3.25")
        if eE > 3.5:
            rep.failures.append(f"delta={delta}: size exponent in |log eps| {eE:.2f} > 3.5")
    rep.fits = fits
    return rep


# ------------------------------------------------------------------ size scaling / end to end

def size_scaling_study(problem, eps_range=(1e-1, 3e-2, 1e-2, 3e-3), calibration: Calibration | None = None,
                       n_test: int = 20, seed: int = 0) -> StudyReport:
    """Builds one operator net per target and records sizes and sampled sup H1 errors."""
    cols = ["eps", "abs_log_eps", "p", "n_b", "n_q", "branch_size", "branch_depth", "trunk_size", "trunk_depth",
            "inversion_K", "eps_u", "eps_b", "h1_sup", "h1_manufactured"]
    d = problem.d
    rep = StudyReport("size", cols, grid={"eps": list(eps_range), "d": d, "n_test": n_test, "problem": problem.name},
                      env=environment(seed), plot={"x": "abs_log_eps", "y": ["branch_size", "trunk_size"],
                                                   "logx": True, "logy": True})
    if calibration is None:
        calibration, crep = calibration_study(problem, seed=seed)
        if calibration is None:
            rep.failures += crep.failures
            return rep
    rep.fits["calibration"] = {"C_G": calibration.C_G, "b_G": calibration.b_G, "sup_u": calibration.sup_u}
    extended = problem.kind != "scalar"
    family = problem.family(n_test, study_stream(seed, "size-test")) if n_test else []
    for eps in eps_range:
        try:
            bounds = problem.bounds if not extended else (problem.coefficient.coercivity,
                                                          problem.coefficient.continuity)
            plan = make_plan(d, eps, calibration, bounds, extended=extended)
            onet = build_rd_onet(problem, plan) if extended else build_onet(problem, plan)
            sup = 0.0
            for c in family:
                sup = max(sup, error_norms(problem.reference(c), onet.field(c), d=d)[1])
            man = (error_norms(problem.solution, onet.field(problem.coefficient), d=d)[1]
                   if problem.solution is not None else None)
            r = onet.report
            rep.add_row(eps=eps, abs_log_eps=abs(math.log(eps)), p=plan.p, n_b=plan.n_b, n_q=plan.n_q,
                        branch_size=onet.branch.size, branch_depth=onet.branch.depth, trunk_size=onet.trunk.size,
                        trunk_depth=onet.trunk.depth, inversion_K=r["branch"]["inversion"]["K"],
                        eps_u=plan.eps_u, eps_b=plan.eps_b, h1_sup=sup if family else None, h1_manufactured=man)
            if family and sup > eps:
                rep.failures.append(f"eps={eps}: sampled sup H1 error {sup:.3e} > eps")
            if man is not None and man > eps:
                rep.failures.append(f"eps={eps}: manufactured H1 error {man:.3e} > eps")
            del onet
            gc.collect()
        except Exception as exc:
            rep.failures.append(f"eps={eps}: {type(exc).__name__}: {exc}")
    if len(rep.rows) >= 2:
        x = rep.column("abs_log_eps")
        sb = _loglog_slope(x, rep.column("branch_size"))
        st = _loglog_slope(x, rep.column("trunk_size"))
        nq = rep.column("n_q")
        rep.fits.update({"branch_slope": sb, "trunk_slope": st, "branch_limit": 3 * d + 2.5,
                         "trunk_limit": d + 1.5, "n_q_constant": float(np.max(nq / (1.0 + x ** d)))})
        if sb > 3 * d + 2.5:
            rep.failures.append(f"branch size slope {sb:.2f} > {3 * d + 2.5}")
        if st > d + 1.5:
            rep.failures.append(f"trunk size slope {st:.2f} > {d + 1.5}")
    return rep


# ------------------------------------------------------------------ Lipschitz

def lipschitz_study(problem, scales=(1e-1, 1e-2, 1e-3, 1e-4), perturbation: str | None = None,
                    p: int | None = None, seed: int = 0) -> StudyReport:
    """||u^{a + t eta} - u^a||_H1 / (t ||eta||_inf) across perturbation scales t."""
    d = problem.d
    p = p or {1: 16, 2: 8, 3: 5}[d]
    eta = ScalarFunction.parse(perturbation or ("cos(2*pi*x1)" if d == 1 else "cos(2*pi*x1)*sin(2*pi*x2)"), d)
    rep = StudyReport("lipschitz", ["t", "eta_sup", "h1_difference", "ratio"],
                      grid={"t": list(scales), "p": p, "perturbation": str(eta.expr), "problem": problem.name},
                      env=environment(seed), plot={"x": "t", "y": ["ratio"], "logx": True, "logy": False})
    if problem.kind != "scalar":
        rep.failures.append("the Lipschitz study perturbs a scalar coefficient")
        return rep
    a = problem.coefficient
    sup = float(np.abs(eta.value(gauss_lobatto(64, d).nodes)).max())
    u0 = galerkin_solve(a, problem.source, p)
    for t in scales:
        try:
            pert = CoefficientField(d=d, a_min=max(a.a_min - t * sup, 1e-12), a_max=a.a_max + t * sup,
                                    a=a.a + eta * ScalarFunction.constant(float(t), d))
            diff = error_norms(u0, galerkin_solve(pert, problem.source, p), d=d)[1]
            rep.add_row(t=t, eta_sup=sup, h1_difference=diff, ratio=diff / (t * sup))
        except Exception as exc:
            rep.failures.append(f"t={t}: {type(exc).__name__}: {exc}")
    if rep.rows:
        ratios = rep.column("ratio")
        spread = float(ratios.max() / ratios.min()) if ratios.min() > 0 else math.inf
        rep.fits = {"L_hat": float(ratios.max()), "spread": spread}
        if spread > 2:
            rep.failures.append(f"ratio spread {spread:.3f} > 2")
    return rep


# ------------------------------------------------------------------ parametric

PARAMETRIC_SOURCE = "4*pi**2*sin(2*pi*x1)"


def parametric_study(eps_range=(1e-1,), n_y: int = 21, family=None, source: str = PARAMETRIC_SOURCE,
                     seed: int = 0) -> StudyReport:
    family = family or cosine_family()
    f = ScalarFunction.parse(source, family.d)
    cols = ["eps", "n_p", "p", "branch_size", "trunk_size", "L_hat", "eps_p", "min_truncated", "h1_sup"]
    rep = StudyReport("parametric", cols, grid={"eps": list(eps_range), "n_y": n_y, "source": source,
                                                "family": family.meta},
                      env=environment(seed), plot={"x": "eps", "y": ["h1_sup"], "logx": True})
    Y = family.grid(n_y)
    for eps in eps_range:
        try:
            onet = build_parametric_onet(family, f, eps, seed=seed)
            pr = onet.report["parametric"]
            sup = 0.0
            for y in Y:
                ref = galerkin_solve(family.coefficient(y), f, {1: 48, 2: 20, 3: 10}[family.d])
                sup = max(sup, error_norms(ref, onet.field(y), d=family.d)[1])
            rep.add_row(eps=eps, n_p=pr["n_p"], p=pr["inner"]["plan"]["p"], branch_size=onet.branch.size,
                        trunk_size=onet.trunk.size, L_hat=pr["L_hat"], eps_p=pr["eps_p"],
                        min_truncated=pr["min_truncated"], h1_sup=sup)
            if sup > eps:
                rep.failures.append(f"eps={eps}: sup H1 error {sup:.3e} > eps")
            if pr["min_truncated"] < family.a_min / 2:
                rep.failures.append(f"eps={eps}: truncated coefficient below a_min/2")
        except Exception as exc:
            rep.failures.append(f"eps={eps}: {type(exc).__name__}: {exc}")
    return rep
