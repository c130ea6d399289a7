"""Exact Jacobians of ReLU network realizations (forward mode)."""
from __future__ import annotations

import numpy as np

from ..nn_core import Network, ShapeError


def net_value_and_gradient(net: Network, x):
    """Realization (n, out) and Jacobian (n, out, in) at points x (n, in).

    ReLU'(0) is taken as 0.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    if X.shape[1] != net.input_dim:
        raise ShapeError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    n, din = X.shape
    h = np.ascontiguousarray(X.T)                                 # (N, n)
    T = np.broadcast_to(np.eye(din)[:, None, :], (din, n, din)).reshape(din, n * din).copy()
    last = net.depth - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = w @ h + b[:, None]
        T = w @ T
        if l < last:
            mask = h > 0.0
            h *= mask
            T = (T.reshape(-1, n, din) * mask[:, :, None]).reshape(-1, n * din)
    vals = h.T
    J = T.reshape(-1, n, din).transpose(1, 0, 2)
    if single:
        return vals[0], J[0]
    return np.ascontiguousarray(vals), np.ascontiguousarray(J)


def net_gradient(net: Network, x) -> np.ndarray:
    """Jacobian (output_dim x input_dim) at x, or (n, out, in) for a batch."""
    return net_value_and_gradient(net, x)[1]
