import numpy as np
import pytest

from spectral_onet.calculus.gradient import net_value_and_gradient
from spectral_onet.calculus.polynomials import (ApproximationError, basis_size_shape, build_analytic_approx,
                                                build_poly_basis, poly_basis_net)
from spectral_onet.nn_core import realize
from spectral_onet.spectral.basis import PeriodicBasis, shifted_legendre_all
from spectral_onet.spectral.norms import error_norms
from spectral_onet.spectral.quadrature import gauss_legendre


class Component:
    def __init__(self, net, i):
        self.net, self.i, self.d = net, i, net.input_dim

    def value(self, pts):
        return realize(self.net, pts)[:, self.i]

    def gradient(self, pts):
        return net_value_and_gradient(self.net, pts)[1][:, self.i, :]


class BasisMember:
    def __init__(self, basis, i):
        self.basis, self.i, self.d = basis, i, basis.d

    def value(self, pts):
        return self.basis.eval(pts)[0][:, self.i]

    def gradient(self, pts):
        return self.basis.eval(pts)[1][:, self.i, :]


def test_d1_p3_members_match_legendre_combinations():
    eps_b = 1e-2
    net = poly_basis_net(3, 1, eps_b)
    assert net.output_dim == 2
    x = np.linspace(0, 1, 4001)
    L = shifted_legendre_all(3, x)[0].T         # rows L_0..L_3
    out = realize(net, x[:, None])
    assert np.abs(out[:, 0] - L[2]).max() <= eps_b
    assert np.abs(out[:, 1] - (L[3] - L[1])).max() <= eps_b


@pytest.mark.parametrize("p,d,eps_b", [(3, 1, 1e-2), (8, 1, 1e-4), (3, 2, 1e-3)])
def test_h1_error_measured_independently(p, d, eps_b):
    net = poly_basis_net(p, d, eps_b)
    basis = PeriodicBasis(d, p)
    quad = gauss_legendre(4, d, cells=256 if d == 1 else 40)
    worst = max(error_norms(BasisMember(basis, i), Component(net, i), quad=quad)[1] for i in range(basis.n_b))
    assert worst <= eps_b


def test_endpoint_periodicity():
    eps_b = 1e-3
    net = poly_basis_net(6, 1, eps_b)
    gap = np.abs(realize(net, [0.0]) - realize(net, [1.0]))
    assert gap.max() <= 2 * eps_b


def test_d2_p2_tensor_products():
    eps_b = 1e-2
    net = poly_basis_net(2, 2, eps_b)
    assert net.output_dim == 3
    x = np.array([0.25, 0.75])
    basis = PeriodicBasis(2, 2)
    L2 = lambda t: 6 * t * t - 6 * t + 1
    expected = {}
    for i in range(3):
        k = basis.multi_index(i + 1)       # flat indices start at 1
        expected[i] = np.prod([L2(x[j]) if k[j] == 1 else 1.0 for j in range(2)])
    out = realize(net, x)
    np.testing.assert_allclose(out, [expected[i] for i in range(3)], atol=2 * eps_b)


def test_components_have_small_mean():
    eps_b = 1e-3
    net, info = build_poly_basis(5, 1, eps_b)
    quad = gauss_legendre(4, 1, cells=512)
    means = np.abs(quad.weights @ realize(net, quad.nodes))
    assert means.max() <= eps_b
    assert info.mean_error <= eps_b


def test_size_follows_shape():
    # implementation constant measured on this grid (<= 24) with headroom
    for p, d, eps_b in [(3, 1, 1e-2), (12, 1, 1e-4), (20, 1, 1e-5), (2, 2, 1e-2), (4, 2, 1e-3)]:
        net = poly_basis_net(p, d, eps_b)
        assert net.size <= 32 * basis_size_shape(p, d, eps_b)


def test_bad_arguments():
    with pytest.raises(ValueError):
        build_poly_basis(1, 1, 1e-2)
    with pytest.raises(ValueError):
        build_poly_basis(3, 1, 1.5)


def _sup_error(net, f, box, n=10_000, seed=1):
    rng = np.random.default_rng(seed)
    box = np.atleast_2d(box)
    Y = rng.uniform(box[:, 0], box[:, 1], (n, box.shape[0]))
    return np.abs(realize(net, Y)[:, 0] - f(Y)).max()


def test_analytic_identity_is_exact():
    f = lambda Y: Y[:, 0]
    net, info = build_analytic_approx([f], [[-1, 1]], 1e-3)
    assert _sup_error(net, f, [[-1, 1]]) == 0.0


def test_analytic_square():
    f = lambda Y: Y[:, 0] ** 2
    net, info = build_analytic_approx([f], [[-1, 1]], 1e-4)
    assert _sup_error(net, f, [[-1, 1]]) <= 1e-4


def test_analytic_exponential():
    f = lambda Y: np.exp(Y[:, 0])
    net, info = build_analytic_approx([f], [[-1, 1]], 1e-3)
    assert _sup_error(net, f, [[-1, 1]]) <= 1e-3
    assert info.net_error <= 1e-3


def test_analytic_two_parameters_and_several_outputs():
    fs = [lambda Y: np.exp(Y[:, 0] * Y[:, 1]), lambda Y: np.cos(Y[:, 0]) + Y[:, 1]]
    box = [[-1, 1], [0, 0.5]]
    net, _ = build_analytic_approx(fs, box, 1e-3)
    rng = np.random.default_rng(5)
    Y = rng.uniform([-1, 0], [1, 0.5], (5000, 2))
    out = realize(net, Y)
    for i, f in enumerate(fs):
        assert np.abs(out[:, i] - f(Y)).max() <= 1e-3


def test_analytic_degree_cap():
    f = lambda Y: np.abs(Y[:, 0])          # not analytic: slow Chebyshev decay
    with pytest.raises(ApproximationError):
        build_analytic_approx([f], [[-1, 1]], 1e-9, max_degree=16)
