"""Encoder, branch and trunk networks for the coefficient-to-solution map."""
from .branch import (BranchContext, BranchReport, branch_coeff_net, branch_inversion_net, coefficient_readout,
                     input_layer_net, preconditioned_input_net, rd_context, scalar_context)
from .build import (BuildPlan, Encoder, NetworkField, OperatorNet, PlanError, build_onet, build_rd_onet,
                    eval_field, eval_onet, explicit_plan, make_plan)
from .parametric import (FamilyDecayError, ParametricFamily, build_parametric_onet, cosine_family,
                         lipschitz_estimate)

__all__ = [
    "BranchContext", "BranchReport", "branch_coeff_net", "branch_inversion_net", "coefficient_readout",
    "input_layer_net", "preconditioned_input_net", "rd_context", "scalar_context",
    "BuildPlan", "Encoder", "NetworkField", "OperatorNet", "PlanError", "build_onet", "build_rd_onet",
    "eval_field", "eval_onet", "explicit_plan", "make_plan",
    "FamilyDecayError", "ParametricFamily", "build_parametric_onet", "cosine_family", "lipschitz_estimate",
]
