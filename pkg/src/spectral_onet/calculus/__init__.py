"""Constructive ReLU approximations: products, matrix inversion, polynomials."""
from .gradient import net_gradient, net_value_and_gradient
from .inversion import InversionPlan, check_admissible, inversion_net, m_terms, plan_inversion, size_shape
from .polynomials import (AnalyticNetInfo, ApproximationError, BasisNetInfo, analytic_approx_net,
                          basis_h1_errors, basis_size_shape, build_analytic_approx, build_poly_basis,
                          poly_basis_net)
from .products import ApproxSpec, matmul_net, product_error, product_levels, product_net, square_net

__all__ = [
    "net_gradient", "net_value_and_gradient",
    "InversionPlan", "check_admissible", "inversion_net", "m_terms", "plan_inversion", "size_shape",
    "AnalyticNetInfo", "ApproximationError", "BasisNetInfo", "analytic_approx_net", "basis_h1_errors",
    "basis_size_shape", "build_analytic_approx", "build_poly_basis", "poly_basis_net",
    "ApproxSpec", "matmul_net", "product_error", "product_levels", "product_net", "square_net",
]
