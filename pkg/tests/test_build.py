import math

import numpy as np
import pytest

from spectral_onet.calibration import Calibration, CalibrationError, calibrate, p_of_eps
from spectral_onet.onet.build import (Encoder, OperatorNet, PlanError, build_onet, build_rd_onet, eval_onet,
                                      explicit_plan, make_plan)
from spectral_onet.onet.parametric import FamilyDecayError, ParametricFamily, build_parametric_onet, cosine_family
from spectral_onet.problem import ProblemSpec, model_problem, rd_model_problem
from spectral_onet.spectral.coefficients import CoefficientField
from spectral_onet.spectral.galerkin import galerkin_solve
from spectral_onet.spectral.norms import error_norms


@pytest.fixture(scope="module")
def problem():
    return model_problem(1)


@pytest.fixture(scope="module")
def onet(problem):
    plan = explicit_plan(1, 4, 5, 1e-3, 1e-3, problem.bounds)
    return build_onet(problem, plan)


@pytest.fixture(scope="module")
def calibration(problem):
    return calibrate(problem)


def test_explicit_plan_h1_error(problem, onet):
    coefs = [problem.coefficient] + problem.family(9, seed=4)
    for c in coefs:
        h1 = error_norms(galerkin_solve(c, problem.source, 4, 5), onet.field(c), d=1)[1]
        assert h1 <= 5e-2


def test_field_is_linear_in_branch_vector(problem, onet):
    fld = onet.field(problem.coefficient)
    x = np.linspace(0, 1, 17)[:, None]
    np.testing.assert_allclose(fld.scaled(2.0).value(x), 2 * fld.value(x), rtol=1e-13, atol=1e-15)
    zero = fld.scaled(0.0)
    np.testing.assert_array_equal(zero.value(x), 0.0)
    np.testing.assert_array_equal(zero.gradient(x), 0.0)


def test_eval_onet_scalar_and_batch(problem, onet):
    x = np.array([[0.1], [0.35], [0.8]])
    batch = eval_onet(onet, problem.coefficient, x)
    assert batch.shape == (3,)
    assert eval_onet(onet, problem.coefficient, [0.35]) == pytest.approx(batch[1], rel=1e-14)


def test_bundle_round_trip(problem, onet, tmp_path):
    onet.save(tmp_path / "b")
    back = OperatorNet.load(tmp_path / "b")
    x = np.linspace(0, 1, 9)[:, None]
    np.testing.assert_array_equal(back.field(problem.coefficient).value(x), onet.field(problem.coefficient).value(x))
    assert back.report["plan"]["p"] == 4


def test_encoder_round_trip_and_symmetry_check():
    enc = Encoder("rd", np.array([[0.0], [0.5]]), 1)
    assert enc.dim == 4
    back = Encoder.from_dict(enc.to_dict())
    np.testing.assert_array_equal(back.points, enc.points)
    skew = CoefficientField.matrix([["1", "0.1"], ["0", "1"]], "0", 2, 0.5, 1.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        Encoder("rd", np.zeros((3, 2)), 2).encode(skew)


def test_plan_rejects_infeasible_budget(calibration):
    with pytest.raises(PlanError):
        make_plan(1, 10.0, calibration, (0.5, 1.5))
    with pytest.raises(PlanError):
        make_plan(1, -1.0, calibration, (0.5, 1.5))
    with pytest.raises(PlanError):
        explicit_plan(1, 4, 5, 1.5, 1e-3, (0.5, 1.5))


def test_plan_order_is_monotone(calibration):
    ps = [make_plan(1, e, calibration, (0.5, 1.5)).p for e in (0.3, 0.1, 0.03, 0.01, 0.003)]
    assert ps == sorted(ps)
    plan = make_plan(1, 0.1, calibration, (0.5, 1.5))
    assert plan.q == plan.p + 1 and plan.n_b == plan.p - 1
    assert plan.eps_G == pytest.approx(0.1 / 3)
    n, d = plan.n_b, 1
    C_pol = 4.0
    assert plan.eps_u == pytest.approx(0.1 / (3 * math.sqrt(1 + C_pol ** 2 * n ** (4 / d)) * math.sqrt(n)))
    kappa = max(1.0, (2 * plan.p + 1) ** (d / 2) / math.sqrt(n))
    assert plan.eps_b == pytest.approx(0.1 / (3 * n * (2 + calibration.sup_u) * kappa))


def test_calibration_envelope(calibration):
    for p, err in calibration.pilot:
        assert err <= calibration.C_G * math.exp(-calibration.b_G * p) * (1 + 1e-12)
    p = p_of_eps(0.1, calibration.C_G, calibration.b_G)
    good = [q for q, err in calibration.pilot if err <= 0.1 / 3]
    assert p >= min(good)


def test_p_of_eps_properties(calibration):
    C, b = calibration.C_G, calibration.b_G
    assert p_of_eps(1.0, C, b) >= 2
    assert p_of_eps(1e6, C, b) == 2
    for eps in (0.1, 0.01):
        assert p_of_eps(eps, 2 * C, b) - p_of_eps(eps, C, b) <= math.ceil(math.log(2) / b) + 1
    with pytest.raises(ValueError):
        p_of_eps(0.0, C, b)


def test_calibration_rejects_single_order(problem):
    with pytest.raises(CalibrationError):
        calibrate(problem, p_range=[6])


def test_calibration_dict_round_trip(calibration):
    assert Calibration.from_dict(calibration.as_dict()) == calibration


def test_rd_onet():
    problem = rd_model_problem()
    plan = explicit_plan(1, 5, 6, 1e-3, 1e-3, (0.5, 1.5), extended=True)
    net = build_rd_onet(problem, plan)
    assert net.encoder.kind == "rd"
    assert net.trunk.output_dim == net.report["n_b"] == 5
    ref = galerkin_solve(problem.coefficient, problem.source, 5)
    assert error_norms(ref, net.field(problem.coefficient), d=1)[1] <= 5e-2
    with pytest.raises(ValueError):
        build_onet(problem, plan)


def test_problem_file_round_trip(tmp_path):
    doc = {"dimension": 1, "name": "file",
           "coefficient": {"kind": "scalar", "a": "1 + 0.5*sin(2*pi*x1)", "a_min": 0.5, "a_max": 1.5},
           "solution": "sin(2*pi*x1)"}
    path = tmp_path / "p.json"
    import json
    path.write_text(json.dumps(doc))
    prob = ProblemSpec.load(path)
    ref = model_problem(1)
    x = np.linspace(0, 1, 11)[:, None]
    np.testing.assert_allclose(prob.source.value(x), ref.source.value(x), atol=1e-12)
    with pytest.raises(ValueError):
        ProblemSpec.from_dict({"coefficient": doc["coefficient"]})


# ------------------------------------------------------------------ parametric

@pytest.fixture(scope="module")
def param_net():
    return build_parametric_onet(cosine_family(), "4*pi**2*sin(2*pi*x1)", 0.1)


def test_parametric_family_values():
    fam = cosine_family()
    Y = np.array([[-1.0], [0.0], [0.5]])
    np.testing.assert_allclose(fam.coefficient_values(Y), [[2, -1], [2, 0], [2, 0.5]])
    x = np.linspace(0, 1, 7)[:, None]
    np.testing.assert_allclose(fam.coefficient([0.0]).values(x), 2.0)
    tails = fam.tails(fam.grid(11), x)
    np.testing.assert_allclose(tails, [3.0, 1.0, 0.0])


def test_parametric_accuracy(param_net):
    fam = cosine_family()
    f = "4*pi**2*sin(2*pi*x1)"
    from spectral_onet.spectral.functions import ScalarFunction
    src = ScalarFunction.parse(f, 1)
    rep = param_net.report["parametric"]
    assert rep["n_p"] == 2
    lo, hi = rep["widened_bounds"]
    assert lo < fam.a_min and hi > fam.a_max
    for y in (-1.0, -0.3, 0.0, 0.7, 1.0):
        exact = galerkin_solve(fam.coefficient([y]), src, 48)
        approx = param_net.field(np.array([y]))
        assert error_norms(exact, approx, d=1)[1] <= 0.1


def test_parametric_y0_equals_constant_coefficient(param_net):
    from spectral_onet.spectral.functions import ScalarFunction
    src = ScalarFunction.parse("4*pi**2*sin(2*pi*x1)", 1)
    exact = galerkin_solve(CoefficientField.scalar("2", 1, 2.0, 2.0), src, 24)
    assert error_norms(exact, param_net.field(np.array([0.0])), d=1)[1] <= 0.1


def test_parametric_rejects_non_decaying_tails():
    fam = ParametricFamily(1, [[-1, 1]], ["2", "cos(2*pi*x1)", "-cos(2*pi*x1)"],
                           [lambda Y: np.full(len(Y), 2.0), lambda Y: Y[:, 0], lambda Y: Y[:, 0]], 2.0, 2.0)
    with pytest.raises(FamilyDecayError):
        build_parametric_onet(fam, "4*pi**2*sin(2*pi*x1)", 0.1)


def test_parametric_truncation_guard():
    fam = cosine_family()
    fam.a_min = 2.5          # declared bound the family does not respect
    with pytest.raises(FamilyDecayError):
        build_parametric_onet(fam, "4*pi**2*sin(2*pi*x1)", 0.1)


PROBLEMS = __import__("pathlib").Path(__file__).resolve().parents[1] / "problems"


@pytest.mark.parametrize("name,builtin", [("model_1d", lambda: model_problem(1)), ("model_2d", lambda: model_problem(2)),
                                          ("rd_1d", rd_model_problem)])
def test_example_problem_files_match_builtins(name, builtin):
    prob, ref = ProblemSpec.load(PROBLEMS / f"{name}.json"), builtin()
    assert prob.kind == ref.kind and prob.d == ref.d
    x = np.random.default_rng(0).random((20, prob.d))
    np.testing.assert_allclose(prob.source.value(x), ref.source.value(x), atol=1e-10)
    np.testing.assert_allclose(prob.solution.value(x), ref.solution.value(x), atol=1e-14)


def test_example_source_problem_solves():
    prob = ProblemSpec.load(PROBLEMS / "source_1d.json")
    assert prob.solution is None and prob.bounds == (1.0, 2.0)
    u = prob.reference(prob.coefficient)
    errs = [error_norms(u, galerkin_solve(prob.coefficient, prob.source, p), d=1)[1] for p in (6, 10, 14, 18)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
