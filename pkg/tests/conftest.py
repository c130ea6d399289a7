import numpy as np
import pytest
import scipy.sparse as sp

from spectral_onet.nn_core import Network


def random_net(rng, input_dim, depth, max_width=6, density=0.6, output_dim=None):
    widths = [input_dim] + [int(rng.integers(1, max_width + 1)) for _ in range(depth)]
    if output_dim is not None:
        widths[-1] = output_dim
    ws, bs = [], []
    for l in range(depth):
        w = sp.random(widths[l + 1], widths[l], density=density, random_state=rng,
                      data_rvs=lambda n: rng.uniform(-2, 2, n), format="csr")
        ws.append(w)
        b = rng.uniform(-1, 1, widths[l + 1]) * (rng.random(widths[l + 1]) < 0.7)
        bs.append(b)
    return Network(input_dim, tuple(ws), tuple(bs))


def sequential(net, x):
    """Reference forward pass with dense matrices, one sample at a time."""
    h = np.asarray(x, float)
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = w.toarray() @ h + b
        if l < net.depth - 1:
            h = np.maximum(h, 0)
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
