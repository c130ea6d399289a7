import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectral_onet.calculus.products import (ApproxSpec, matmul_net, product_error, product_levels, product_net,
                                              square_net)
from spectral_onet.nn_core import realize


def test_zero_factor_is_exact():
    net = product_net(ApproxSpec(1e-3, 8.0))
    assert realize(net, [0.0, 7.0])[0] == 0.0
    assert realize(net, [-3.5, 0.0])[0] == 0.0


def test_two_times_three():
    net = product_net(ApproxSpec(1e-6, 4.0))
    assert abs(realize(net, [2.0, 3.0])[0] - 6.0) <= 1e-6


@pytest.mark.parametrize("eps,M", [(1e-1, 1.0), (1e-3, 1.0), (1e-2, 4.0), (1e-5, 2.0), (1e-8, 1.0)])
def test_product_error_on_grid_and_samples(eps, M, rng):
    net = product_net(ApproxSpec(eps, M))
    g = np.linspace(-M, M, 100)
    X, Y = np.meshgrid(g, g)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = np.vstack([pts, rng.uniform(-M, M, (10_000, 2))])
    err = np.abs(realize(net, pts)[:, 0] - pts[:, 0] * pts[:, 1])
    assert err.max() <= eps


def test_square_net():
    spec = ApproxSpec(1e-4, 3.0)
    x = np.linspace(-3, 3, 2001)
    out = realize(square_net(spec), x[:, None])[:, 0]
    assert np.abs(out - x ** 2).max() <= 1e-4
    assert realize(square_net(spec), [0.0])[0] == 0.0


def test_levels_are_minimal():
    for eps, M in [(1e-2, 1.0), (1e-6, 5.0), (0.3, 1.0)]:
        m = product_levels(eps, M)
        assert product_error(m, M) <= eps
        assert m == 1 or product_error(m - 1, M) > eps


def test_size_and_depth_grow_logarithmically():
    sizes, depths = [], []
    epss = [1e-2, 1e-4, 1e-6, 1e-8]
    for eps in epss:
        net = product_net(ApproxSpec(eps, 1.0))
        sizes.append(net.size)
        depths.append(net.depth)
    # linear in log(1/eps): constant increments
    assert np.all(np.diff(depths) > 0)
    inc = np.diff(sizes)
    assert inc.max() <= 1.5 * inc.min()


def test_matmul_identity_times_c(rng):
    C = rng.uniform(-1, 1, (2, 2))
    net = matmul_net(2, 2, 2, ApproxSpec(1e-6, 1.0))
    out = realize(net, np.concatenate([np.eye(2).ravel(order="F"), C.ravel(order="F")]))
    np.testing.assert_allclose(out, C.ravel(order="F"), atol=2e-6)


def test_matmul_zero_left_factor(rng):
    net = matmul_net(3, 2, 4, ApproxSpec(1e-3, 2.0))
    x = np.concatenate([np.zeros(6), rng.uniform(-2, 2, 8)])
    np.testing.assert_array_equal(realize(net, x), np.zeros(12))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 4), m=st.integers(1, 4), l=st.integers(1, 4), seed=st.integers(0, 2 ** 31))
def test_matmul_operator_norm_error(n, m, l, seed):
    rng = np.random.default_rng(seed)
    eps, M = 1e-4, 1.5
    net = matmul_net(n, m, l, ApproxSpec(eps, M))
    B, C = rng.uniform(-M, M, (n, m)), rng.uniform(-M, M, (m, l))
    out = realize(net, np.concatenate([B.ravel(order="F"), C.ravel(order="F")])).reshape(n, l, order="F")
    assert np.abs(out - B @ C).max() <= eps
    assert np.linalg.norm(out - B @ C, 2) <= eps * np.sqrt(n * l) * m


def test_spec_validation():
    with pytest.raises(ValueError):
        ApproxSpec(0.0)
    with pytest.raises(ValueError):
        ApproxSpec(0.1, delta=1.0)
