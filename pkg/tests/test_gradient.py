import numpy as np

from spectral_onet.calculus.gradient import net_gradient, net_value_and_gradient
from spectral_onet.nn_core import Network, affine_net, realize

from conftest import random_net


def test_affine_jacobian():
    M = np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 3.0]])
    J = net_gradient(affine_net(M, [1.0, 1.0]), np.array([0.3, 0.1, -2.0]))
    np.testing.assert_array_equal(J, M)


def test_relu_derivative_convention():
    relu = Network(1, ([[1.0]], [[1.0]]), ([0.0], [0.0]))
    assert net_gradient(relu, np.array([-1.0]))[0, 0] == 0.0
    assert net_gradient(relu, np.array([1.0]))[0, 0] == 1.0
    assert net_gradient(relu, np.array([0.0]))[0, 0] == 0.0


def test_matches_finite_differences(rng):
    net = random_net(rng, 3, 4, max_width=8)
    X = rng.uniform(-1, 1, (100, 3))
    vals, J = net_value_and_gradient(net, X)
    np.testing.assert_allclose(vals, realize(net, X), rtol=1e-13, atol=1e-13)
    h = 1e-6
    checked = 0
    for x, Jx in zip(X, J):
        fd = np.stack([(realize(net, x + h * e) - realize(net, x - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
        # skip the rare points within h of a breakpoint: there the one-sided slopes differ
        _, Jp = net_value_and_gradient(net, (x + h * np.eye(3)))
        _, Jm = net_value_and_gradient(net, (x - h * np.eye(3)))
        if np.allclose(Jp, Jx) and np.allclose(Jm, Jx):
            np.testing.assert_allclose(Jx, fd, atol=1e-5)
            checked += 1
    assert checked >= 90
