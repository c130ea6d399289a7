"""Explicit operator networks for periodic elliptic problems, with a spectral Galerkin reference solver."""
from .nn_core import (Network, ShapeError, affine_net, concat, identity_net, load_network, parallelize,
                      realize, save_network, sparse_concat)
from .problem import ProblemSpec, model_problem, rd_model_problem

__version__ = "0.1.0"

__all__ = [
    "Network", "ShapeError", "affine_net", "concat", "identity_net", "load_network", "parallelize",
    "realize", "save_network", "sparse_concat", "ProblemSpec", "model_problem", "rd_model_problem",
]
