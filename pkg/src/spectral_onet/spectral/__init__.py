"""Periodic spectral Galerkin discretization."""
from .basis import PeriodicBasis, basis_eval, periodic_1d, shifted_legendre, shifted_legendre_all
from .coefficients import CoefficientError, CoefficientField, random_trig_coefficient, random_trig_family
from .functions import ExpressionError, ScalarFunction, parse_expression, trig_polynomial
from .galerkin import (AssemblyError, DiscreteSystem, PreconditionError, SolutionField, SpectrumError,
                       assemble, galerkin_solve, manufactured_problem, spectrum_bounds)
from .norms import error_norms
from .quadrature import QuadratureError, QuadratureRule, gauss_legendre, gauss_lobatto

__all__ = [
    "PeriodicBasis", "basis_eval", "periodic_1d", "shifted_legendre", "shifted_legendre_all",
    "CoefficientError", "CoefficientField", "random_trig_coefficient", "random_trig_family",
    "ExpressionError", "ScalarFunction", "parse_expression", "trig_polynomial",
    "AssemblyError", "DiscreteSystem", "PreconditionError", "SolutionField", "SpectrumError",
    "assemble", "galerkin_solve", "manufactured_problem", "spectrum_bounds", "error_norms",
    "QuadratureError", "QuadratureRule", "gauss_legendre", "gauss_lobatto",
]
