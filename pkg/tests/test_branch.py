import numpy as np
import pytest
import scipy.linalg as sla

from spectral_onet.nn_core import realize
from spectral_onet.onet.branch import (branch_coeff_net, branch_inversion_net, input_layer_net,
                                       preconditioned_input_net, rd_context, scalar_context)
from spectral_onet.spectral.basis import PeriodicBasis
from spectral_onet.spectral.coefficients import CoefficientField, random_trig_family
from spectral_onet.spectral.functions import ScalarFunction
from spectral_onet.spectral.galerkin import assemble
from spectral_onet.spectral.quadrature import gauss_lobatto

ONE = CoefficientField.scalar("1", 1, 1.0, 1.0)
A_SIN = CoefficientField.scalar("1 + 0.5*sin(2*pi*x1)", 1, 0.5, 1.5)


def ctx_for(p, d=1, bounds=(0.5, 1.5), q=None):
    return scalar_context(PeriodicBasis(d, p), gauss_lobatto(q or p + 1, d), bounds)


def matr(v, n):
    return np.asarray(v).reshape(n, n, order="F")


def test_input_layer_d1_p3():
    ctx = ctx_for(3, bounds=(1.0, 1.0), q=4)
    out = realize(input_layer_net(ctx, alpha=1.0), ONE.values(ctx.quad.nodes))
    np.testing.assert_allclose(matr(out, 2), -np.diag([12.0, 20.0]), atol=1e-12)
    assert input_layer_net(ctx).size <= ctx.n ** 2 * ctx.quad.n_q


def test_input_layer_is_linear_in_a():
    ctx = ctx_for(5)
    net = input_layer_net(ctx, alpha=0.7)
    np.testing.assert_array_equal(realize(net, np.zeros(ctx.quad.n_q)), 0.0)


@pytest.mark.parametrize("d,p", [(1, 6), (2, 4)])
def test_input_layer_matches_assembly(d, p):
    ctx = ctx_for(p, d)
    net = input_layer_net(ctx, alpha=0.5)
    for c in random_trig_family(5, d, seed=p, max_freq=1):
        sys = assemble(c, ctx.basis, ctx.quad)
        out = matr(realize(net, c.values(ctx.quad.nodes)), ctx.n)
        np.testing.assert_allclose(out, -0.5 * sys.stiffness, atol=1e-12 * np.abs(sys.stiffness).max())


def test_input_layer_rejects_low_quadrature():
    with pytest.raises(ValueError):
        scalar_context(PeriodicBasis(1, 5), gauss_lobatto(5), (0.5, 1.5))


def test_preconditioned_a_equal_one():
    ctx = ctx_for(5)
    a = ctx.alpha
    for mode in ("symmetric", "left"):
        out = matr(realize(preconditioned_input_net(ctx, mode=mode), ONE.values(ctx.quad.nodes)), ctx.n)
        np.testing.assert_allclose(out, (1 - a) * np.eye(ctx.n), atol=1e-12)


def test_preconditioned_left_form_matches_assembly():
    ctx = ctx_for(6)
    sys = assemble(A_SIN, ctx.basis, ctx.quad)
    out = matr(realize(preconditioned_input_net(ctx, mode="left"), A_SIN.values(ctx.quad.nodes)), ctx.n)
    np.testing.assert_allclose(out, np.eye(ctx.n) - ctx.alpha * sys.preconditioned, atol=1e-11)


def test_symmetric_form_matches_assembly():
    ctx = ctx_for(6)
    sys = assemble(A_SIN, ctx.basis, ctx.quad)
    out = matr(realize(preconditioned_input_net(ctx), A_SIN.values(ctx.quad.nodes)), ctx.n)
    np.testing.assert_allclose(out, np.eye(ctx.n) - ctx.alpha * sys.sym_preconditioned, atol=1e-11)


@pytest.mark.parametrize("d,ps", [(1, [3, 6, 10, 16]), (2, [3, 5])])
def test_norm_guard_symmetric(d, ps):
    for p in ps:
        ctx = ctx_for(p, d)
        net = preconditioned_input_net(ctx)
        coefs = [A_SIN] if d == 1 else []
        coefs += random_trig_family(10, d, seed=p, max_freq=1)
        for c in coefs:
            M = matr(realize(net, c.values(ctx.quad.nodes)), ctx.n)
            assert np.linalg.norm(M, 2) <= 1 - ctx.delta + 1e-10


def test_left_form_can_exceed_the_guard():
    # the left form is not normal: its spectral norm is not bounded by its spectral radius
    ctx = ctx_for(16)
    M = matr(realize(preconditioned_input_net(ctx, mode="left"), A_SIN.values(ctx.quad.nodes)), ctx.n)
    assert np.max(np.abs(np.linalg.eigvals(M))) <= 1 - ctx.delta + 1e-10
    assert np.linalg.norm(M, 2) > 1 - ctx.delta


def test_left_form_within_guard_at_small_p():
    ctx = ctx_for(4)
    M = matr(realize(preconditioned_input_net(ctx, mode="left"), A_SIN.values(ctx.quad.nodes)), ctx.n)
    assert np.linalg.norm(M, 2) <= 1 - ctx.delta


def test_branch_inversion_a_equal_one():
    ctx = ctx_for(4)
    net, rep = branch_inversion_net(ctx, 1e-2)
    out = matr(realize(net, ONE.values(ctx.quad.nodes)), ctx.n)
    assert np.linalg.norm(out - np.eye(ctx.n), 2) <= 1e-2


@pytest.mark.parametrize("mode", ["symmetric", "left"])
def test_branch_inversion_model_coefficient(mode):
    ctx = ctx_for(4)
    eps_inv = 1e-2
    net, rep = branch_inversion_net(ctx, eps_inv, mode)
    sys = assemble(A_SIN, ctx.basis, ctx.quad)
    target = sys.sym_preconditioned if mode == "symmetric" else sys.preconditioned
    out = matr(realize(net, A_SIN.values(ctx.quad.nodes)), ctx.n)
    assert np.linalg.norm(np.linalg.inv(target) - out, 2) <= eps_inv
    assert np.linalg.norm(out, 2) <= eps_inv + 1 / ctx.delta


def test_branch_inversion_family():
    ctx = ctx_for(6)
    eps_inv = 1e-3
    net, _ = branch_inversion_net(ctx, eps_inv)
    for c in random_trig_family(10, 1, seed=9, max_freq=1):
        sys = assemble(c, ctx.basis, ctx.quad)
        out = matr(realize(net, c.values(ctx.quad.nodes)), ctx.n)
        assert np.linalg.norm(np.linalg.inv(sys.sym_preconditioned) - out, 2) <= eps_inv


def test_branch_inversion_rejects_bad_eps():
    with pytest.raises(ValueError):
        branch_inversion_net(ctx_for(3), 1.0)


def test_coefficients_d1_p3():
    ctx = ctx_for(3, bounds=(1.0, 1.0), q=4)
    eps_u = 1e-3
    net, _ = branch_coeff_net(ctx, np.array([0.2, 0.0]), eps_u=eps_u, f_norm=np.sqrt(0.2))
    out = realize(net, ONE.values(ctx.quad.nodes))
    assert np.linalg.norm(out - [0.2 / 12, 0.0]) <= eps_u


def test_coefficients_zero_source():
    ctx = ctx_for(4)
    net, _ = branch_coeff_net(ctx, np.zeros(ctx.n), eps_u=1e-3, f_norm=1.0)
    assert np.linalg.norm(realize(net, A_SIN.values(ctx.quad.nodes))) <= 1e-3


@pytest.mark.parametrize("mode", ["symmetric", "left"])
def test_coefficients_random_family(mode):
    f = ScalarFunction.parse("4*pi**2*sin(2*pi*x1) + cos(4*pi*x1)", 1)
    p = 5
    ctx = ctx_for(p)
    rhs = assemble(A_SIN, ctx.basis, ctx.quad, f).rhs
    eps_u = 1e-4
    net, _ = branch_coeff_net(ctx, rhs, eps_u=eps_u, f_norm=np.sqrt(8 * np.pi ** 4 + 0.5), mode=mode)
    for c in random_trig_family(20, 1, seed=21, max_freq=1):
        sys = assemble(c, ctx.basis, ctx.quad, f)
        assert np.linalg.norm(realize(net, c.values(ctx.quad.nodes)) - sys.solution) <= eps_u


def test_encoder_permutation_invariance():
    ctx = ctx_for(4)
    net = input_layer_net(ctx, alpha=0.5)
    rng = np.random.default_rng(3)
    perm = rng.permutation(ctx.quad.n_q)
    W = net.weights[0][:, perm]
    samples = A_SIN.values(ctx.quad.nodes)
    np.testing.assert_allclose(W @ samples[perm], realize(net, samples), atol=1e-13)


def test_rd_input_layer():
    coef = CoefficientField.matrix([["1"]], "1", 1, 1.0, 1.0, 1.0, 1.0)
    basis, quad = PeriodicBasis(1, 4), gauss_lobatto(5)
    ctx = rd_context(basis, quad, (1.0, 1.0))
    enc = np.concatenate([coef.values(quad.nodes).reshape(-1), coef.reaction(quad.nodes)])
    out = matr(realize(input_layer_net(ctx, alpha=ctx.alpha), enc), ctx.n)
    np.testing.assert_allclose(out, -ctx.alpha * ctx.reference, atol=1e-12)
    assert ctx.reference[-1, -1] == pytest.approx(1.0, abs=1e-14)
    assert input_layer_net(ctx).size <= 2 * ctx.n ** 2 * quad.n_q


def test_rd_reduces_to_scalar_block():
    a = "1 + 0.5*sin(2*pi*x1)*cos(2*pi*x2)"
    rd = CoefficientField.matrix([[a, "0"], ["0", a]], "0", 2, 0.5, 1.5, 0.0, 0.0)
    sc = CoefficientField.scalar(a, 2, 0.5, 1.5)
    basis, quad = PeriodicBasis(2, 3), gauss_lobatto(4, 2)
    ctx_rd = rd_context(basis, quad, (0.5, 1.5))
    ctx_sc = scalar_context(basis, quad, (0.5, 1.5))
    A = rd.values(quad.nodes)
    enc = np.concatenate([np.swapaxes(A, 1, 2).reshape(len(quad.nodes), -1).ravel(), rd.reaction(quad.nodes)])
    big = matr(realize(input_layer_net(ctx_rd), enc), ctx_rd.n)
    small = matr(realize(input_layer_net(ctx_sc), sc.values(quad.nodes)), ctx_sc.n)
    np.testing.assert_allclose(big[:-1, :-1], small, atol=1e-12)


def test_c_a_constant_is_positive():
    for p in (3, 6, 9, 12):
        assert 0 < ctx_for(p).C_A < 1
