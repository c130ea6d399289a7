"""Diffusion (and reaction) coefficients with declared bounds."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import sympy

from .functions import ScalarFunction, trig_polynomial


class CoefficientError(ValueError):
    pass


@dataclass
class CoefficientField:
    """Scalar coefficient a, or symmetric matrix A plus reaction c.

    Bounds are declared; ``validate`` checks them by sampling.  For the matrix
    kind a_min/a_max bound the eigenvalues of A and c_min/c_max bound c.
    """

    d: int
    a_min: float
    a_max: float
    a: ScalarFunction | None = None
    A: list | None = None
    c: ScalarFunction | None = None
    c_min: float | None = None
    c_max: float | None = None
    analyticity: float | None = None      # metadata only
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.a is None) == (self.A is None):
            raise CoefficientError("give exactly one of a (scalar) or A (matrix)")
        if not 0 < self.a_min <= self.a_max:
            raise CoefficientError("need 0 < a_min <= a_max")
        if self.A is not None:
            if len(self.A) != self.d or any(len(r) != self.d for r in self.A):
                raise CoefficientError("matrix coefficient must be d x d")
            if self.c is None:
                self.c = ScalarFunction(sympy.Integer(0), self.d)
                self.c_min = self.c_max = 0.0
            if self.c_min is None or self.c_max is None:
                raise CoefficientError("reaction term needs declared bounds c_min, c_max")

    @property
    def kind(self) -> str:
        return "scalar" if self.a is not None else "matrix+reaction"

    @property
    def coercivity(self) -> float:
        return self.a_min if self.kind == "scalar" else min(self.a_min, self.c_min)

    @property
    def continuity(self) -> float:
        return self.a_max if self.kind == "scalar" else max(self.a_max, self.c_max)

    @classmethod
    def scalar(cls, a, d, a_min, a_max, **kw):
        if isinstance(a, str):
            a = ScalarFunction.parse(a, d)
        elif not isinstance(a, ScalarFunction):
            a = ScalarFunction(sympy.sympify(a), d)
        return cls(d=d, a_min=a_min, a_max=a_max, a=a, **kw)

    @classmethod
    def matrix(cls, A, c, d, a_min, a_max, c_min, c_max, **kw):
        def conv(v):
            if isinstance(v, ScalarFunction):
                return v
            if isinstance(v, str):
                return ScalarFunction.parse(v, d)
            return ScalarFunction(sympy.sympify(v), d)
        A = [[conv(v) for v in row] for row in A]
        return cls(d=d, a_min=a_min, a_max=a_max, A=A, c=conv(c), c_min=c_min, c_max=c_max, **kw)

    def values(self, points) -> np.ndarray:
        """(n,) for the scalar kind, (n, d, d) for the matrix kind."""
        if self.kind == "scalar":
            return self.a.value(points)
        return np.stack([np.stack([e.value(points) for e in row], axis=1) for row in self.A], axis=1)

    def reaction(self, points) -> np.ndarray:
        if self.c is None:
            return np.zeros(np.asarray(points).reshape(-1, self.d).shape[0])
        return self.c.value(points)

    def validate(self, points=None, n_random: int = 1000, seed: int = 0, sym_tol: float = 1e-12):
        """Sampling check of the declared bounds (quadrature grid plus random points)."""
        rng = np.random.default_rng(seed)
        pts = rng.random((n_random, self.d))
        if points is not None:
            pts = np.vstack([np.asarray(points).reshape(-1, self.d), pts])
        tol = 1e-12 * max(1.0, self.a_max)
        if self.kind == "scalar":
            v = self.values(pts)
            if v.min() < self.a_min - tol or v.max() > self.a_max + tol:
                raise CoefficientError(f"a outside [{self.a_min}, {self.a_max}]: range [{v.min()}, {v.max()}]")
            return
        M = self.values(pts)
        if np.max(np.abs(M - np.swapaxes(M, 1, 2))) > sym_tol:
            raise CoefficientError("matrix coefficient is not symmetric")
        ev = np.linalg.eigvalsh(M)
        if ev.min() < self.a_min - tol or ev.max() > self.a_max + tol:
            raise CoefficientError("matrix coefficient eigenvalues outside declared bounds")
        c = self.reaction(pts)
        if c.min() < self.c_min - tol or c.max() > self.c_max + tol:
            raise CoefficientError("reaction coefficient outside declared bounds")


def random_trig_coefficient(d: int, rng, a_min: float = 0.5, a_max: float = 1.5,
                            max_freq: int = 2, fill: float | None = None) -> CoefficientField:
    """a = a0 + sum of cos/sin modes with |k|_inf <= max_freq.

    The l1 norm of the mode coefficients is at most (a_max - a_min)/2, which
    certifies the bounds without sampling.  ``fill`` fixes that l1 norm as a
    fraction of the half-width (random in (0, 1] otherwise).
    """
    a0 = 0.5 * (a_min + a_max)
    amp = 0.5 * (a_max - a_min)
    ks = [k for k in itertools.product(range(-max_freq, max_freq + 1), repeat=d)
          if any(k) and next(v for v in k if v != 0) > 0]
    raw = rng.standard_normal((len(ks), 2)) / (1.0 + np.abs(np.asarray(ks)).sum(axis=1))[:, None]
    frac = rng.uniform(0.2, 1.0) if fill is None else fill
    raw *= frac * amp / np.abs(raw).sum()
    terms = [("1", None, a0)]
    for k, (cc, ss) in zip(ks, raw):
        terms += [("cos", k, float(cc)), ("sin", k, float(ss))]
    a = trig_polynomial(d, terms)
    return CoefficientField(d=d, a_min=a_min, a_max=a_max, a=a, analyticity=2 * np.pi * max_freq,
                            meta={"family": "trig", "modes": len(ks)})


def random_trig_family(n: int, d: int, seed, **kw) -> list[CoefficientField]:
    rng = np.random.default_rng(seed)
    return [random_trig_coefficient(d, rng, **kw) for _ in range(n)]
