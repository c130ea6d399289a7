"""Pilot convergence runs and the fitted constants C_G, b_G."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .spectral.galerkin import galerkin_solve
from .spectral.norms import error_norms

ROUNDOFF_FLOOR = 1e-11       # pilot errors below this are treated as saturated
SUP_U_SLACK = 1.2


class CalibrationError(RuntimeError):
    pass


@dataclass
class ExpFit:
    slope: float          # b_G, positive for decay
    log_c: float          # least-squares intercept
    residual: float       # max |log e - fit|
    span: float           # max log e - min log e

    @property
    def relative_residual(self) -> float:
        return self.residual / self.span if self.span > 0 else math.inf


def fit_exponential(ps, errors) -> ExpFit:
    """Least-squares fit log e = log C - b p."""
    ps = np.asarray(ps, float)
    le = np.log(np.asarray(errors, float))
    if ps.size < 2 or np.unique(ps).size < 2:
        raise CalibrationError("at least two distinct orders are needed to fit a rate")
    A = np.stack([np.ones_like(ps), -ps], axis=1)
    (logc, b), *_ = np.linalg.lstsq(A, le, rcond=None)
    res = np.abs(le - (logc - b * ps))
    return ExpFit(float(b), float(logc), float(res.max()), float(le.max() - le.min()))


@dataclass
class Calibration:
    C_G: float
    b_G: float
    sup_u: float
    fit: dict
    pilot: list = field(default_factory=list)    # rows (p, max H1 error)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


def p_of_eps(eps: float, C_G: float, b_G: float) -> int:
    """Smallest order with C_G exp(-b_G p) <= eps/3, plus one, at least 2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(2, math.ceil((math.log(C_G) - math.log(eps / 3.0)) / b_G) + 1)


def pilot_errors(coefs, f, p_range, reference, q_rule=lambda p: p + 1):
    """Max over coefficients of the H1 Galerkin error for each p; also the max L2 norm of the references."""
    rows = []
    refs = [reference(c) for c in coefs]
    for p in p_range:
        worst = 0.0
        for c, u in zip(coefs, refs):
            worst = max(worst, error_norms(u, galerkin_solve(c, f, p, q_rule(p)), d=c.d)[1])
        rows.append((int(p), worst))
    sup_u = max(error_norms(u, None, d=coefs[0].d)[0] for u in refs)
    return rows, sup_u


def calibrate_from_rows(rows, sup_u) -> Calibration:
    ps = np.array([r[0] for r in rows], float)
    es = np.array([r[1] for r in rows], float)
    keep = es > ROUNDOFF_FLOOR
    if keep.sum() < 2:
        raise CalibrationError("fewer than two pilot errors above the round-off floor")
    ps, es = ps[keep], es[keep]
    if not es[-1] < es[0]:
        raise CalibrationError("pilot errors do not decrease over the p range")
    fit = fit_exponential(ps, es)
    if fit.slope <= 0:
        raise CalibrationError(f"fitted rate b_G = {fit.slope} is not positive")
    # shift the line up so that every pilot point lies on or below it
    log_c = float(np.max(np.log(es) + fit.slope * ps))
    return Calibration(math.exp(log_c), fit.slope, SUP_U_SLACK * sup_u, asdict(fit) | {"log_c_envelope": log_c},
                       [list(r) for r in rows])


def calibrate(problem, p_range=None, n_family: int = 6, seed: int = 0) -> Calibration:
    """Fit (C_G, b_G) on a pilot run over the problem's coefficient family."""
    if p_range is None:
        p_range = range(2, {1: 21, 2: 11, 3: 7}[problem.d])
    coefs = problem.family(n_family, seed) if problem.kind == "scalar" else []
    coefs = [problem.coefficient] + coefs
    rows, sup_u = pilot_errors(coefs, problem.source, p_range, problem.reference)
    return calibrate_from_rows(rows, sup_u)
