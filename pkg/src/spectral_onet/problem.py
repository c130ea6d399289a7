"""Problem definitions: coefficient (or coefficient family), source and reference solutions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral.coefficients import CoefficientField, random_trig_family
from .spectral.functions import ScalarFunction
from .spectral.galerkin import galerkin_solve, manufactured_problem

DEFAULT_REFERENCE_P = {1: 48, 2: 20, 3: 10}


@dataclass(eq=False)
class ProblemSpec:
    """A periodic elliptic problem.

    ``coefficient`` is the fixed coefficient used by solve/converge.  The family
    used for sup-over-coefficients checks is drawn from random trigonometric
    polynomials inside ``bounds`` (scalar kind) or is the fixed coefficient
    alone (matrix+reaction kind).
    """

    d: int
    coefficient: CoefficientField
    source: ScalarFunction
    solution: ScalarFunction | None = None
    bounds: tuple | None = None
    max_freq: int = 1
    p: int | None = None
    q: int | None = None
    reference_p: int | None = None
    name: str = "problem"
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = (self.coefficient.coercivity, self.coefficient.continuity)
        if self.reference_p is None:
            self.reference_p = DEFAULT_REFERENCE_P[self.d]

    @property
    def kind(self) -> str:
        return self.coefficient.kind

    @classmethod
    def manufactured(cls, coefficient: CoefficientField, solution, **kw) -> "ProblemSpec":
        if isinstance(solution, str):
            solution = ScalarFunction.parse(solution, coefficient.d)
        f = manufactured_problem(solution, coefficient)
        return cls(d=coefficient.d, coefficient=coefficient, source=f, solution=solution, **kw)

    def family(self, n: int, seed) -> list[CoefficientField]:
        if self.kind != "scalar":
            return [self.coefficient] * n
        lo, hi = self.bounds
        return random_trig_family(n, self.d, seed, a_min=lo, a_max=hi, max_freq=self.max_freq)

    def reference(self, coef: CoefficientField):
        """High-order Galerkin solution used as ground truth for coefficient ``coef``."""
        if coef is self.coefficient and self.solution is not None:
            return self.solution
        return _reference(coef, self.source, self.reference_p)

    # ------------------------------------------------------------ JSON
    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemSpec":
        d = int(doc.get("dimension", 1))
        cdoc = doc["coefficient"]
        kind = cdoc.get("kind", "scalar")
        if kind == "scalar":
            coef = CoefficientField.scalar(cdoc["a"], d, float(cdoc["a_min"]), float(cdoc["a_max"]))
        elif kind in ("matrix+reaction", "rd"):
            coef = CoefficientField.matrix(cdoc["A"], cdoc.get("c", "0"), d, float(cdoc["a_min"]),
                                           float(cdoc["a_max"]), float(cdoc.get("c_min", 0.0)),
                                           float(cdoc.get("c_max", 0.0)))
        else:
            raise ValueError(f"unknown coefficient kind {kind!r}")
        fam = doc.get("family", {})
        bounds = (float(fam["a_min"]), float(fam["a_max"])) if "a_min" in fam else None
        common = dict(bounds=bounds, max_freq=int(fam.get("max_freq", 1)), p=doc.get("p"), q=doc.get("q"),
                      reference_p=doc.get("reference_p"), name=doc.get("name", "problem"), raw=doc)
        if "solution" in doc:
            return cls.manufactured(coef, doc["solution"], **common)
        if "source" not in doc:
            raise ValueError("problem needs a 'solution' or a 'source' expression")
        f = ScalarFunction.parse(doc["source"], d)
        return cls(d=d, coefficient=coef, source=f, **common)

    @classmethod
    def load(cls, path) -> "ProblemSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


_REF_CACHE: dict = {}


def _reference(coef, f, p):
    key = (id(coef), id(f), p)
    hit = _REF_CACHE.get(key)
    if hit is not None and hit[0] is coef and hit[1] is f:
        return hit[2]
    sol = galerkin_solve(coef, f, p)
    if len(_REF_CACHE) > 512:
        _REF_CACHE.clear()
    _REF_CACHE[key] = (coef, f, sol)
    return sol


def model_problem(d: int = 1) -> ProblemSpec:
    """a = 1 + sin(2 pi x_1)/2 (times cos(2 pi x_2) in 2-D) with u = prod sin(2 pi x_j)."""
    if d == 1:
        coef = CoefficientField.scalar("1 + 0.5*sin(2*pi*x1)", 1, 0.5, 1.5)
        u = "sin(2*pi*x1)"
    elif d == 2:
        coef = CoefficientField.scalar("1 + 0.5*sin(2*pi*x1)*cos(2*pi*x2)", 2, 0.5, 1.5)
        u = "sin(2*pi*x1)*sin(2*pi*x2)"
    else:
        raise ValueError("model problem defined for d = 1, 2")
    return ProblemSpec.manufactured(coef, u, name=f"model-{d}d")


def rd_model_problem() -> ProblemSpec:
    """A = (1 + sin(2 pi x)/2) Id, c = 1 + cos(2 pi x)/4, u = sin(2 pi x), d = 1."""
    coef = CoefficientField.matrix([["1 + 0.5*sin(2*pi*x1)"]], "1 + 0.25*cos(2*pi*x1)", 1,
                                   0.5, 1.5, 0.75, 1.25)
    return ProblemSpec.manufactured(coef, "sin(2*pi*x1)", name="rd-model-1d")
