"""Feed-forward ReLU networks with sparse weights.

A network is an ordered list of affine layers ``(W_l, b_l)``.  ReLU acts on
every layer except the last.  Weights are kept as CSR matrices so that the
size of a network (stored nonzero weights plus nonzero biases) is a plain
count and never an estimate.  Weight matrices are treated as read-only once
they are part of a network, so composed networks share unchanged layers.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class ShapeError(ValueError):
    """Raised when layer or input dimensions do not line up."""


def _as_csr(w) -> sp.csr_matrix:
    # canonical CSR input is shared, not copied: composed networks reuse layers
    if (sp.isspmatrix_csr(w) and w.dtype == np.float64 and w.has_sorted_indices
            and w.has_canonical_format and (w.nnz == 0 or np.all(w.data != 0))):
        return w
    if sp.issparse(w):
        m = sp.csr_matrix(w, dtype=np.float64, copy=True)
    else:
        m = sp.csr_matrix(np.atleast_2d(np.asarray(w, dtype=np.float64)))
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable ReLU network.

    ``weights[l]`` has shape ``(N_l, N_{l-1})`` and ``biases[l]`` length ``N_l``.
    """

    input_dim: int
    weights: tuple
    biases: tuple

    def __post_init__(self):
        if self.input_dim < 1:
            raise ShapeError("input_dim must be positive")
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise ShapeError("a network needs at least one layer and one bias per layer")
        ws = tuple(_as_csr(w) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64).reshape(-1).copy() for b in self.biases)
        cols = self.input_dim
        for l, (w, b) in enumerate(zip(ws, bs)):
            if w.shape[1] != cols:
                raise ShapeError(f"layer {l}: expected {cols} columns, got {w.shape[1]}")
            if b.shape[0] != w.shape[0]:
                raise ShapeError(f"layer {l}: bias length {b.shape[0]} != rows {w.shape[0]}")
            if not (np.all(np.isfinite(w.data)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: non-finite parameters")
            cols = w.shape[0]
        for b in bs:
            b.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def widths(self) -> list[int]:
        """N_0, N_1, ..., N_L."""
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def layer_size(self, l: int) -> int:
        return int(self.weights[l].nnz + np.count_nonzero(self.biases[l]))

    @property
    def size(self) -> int:
        return sum(self.layer_size(l) for l in range(self.depth))

    def __repr__(self):
        return f"Network(input_dim={self.input_dim}, depth={self.depth}, output_dim={self.output_dim}, size={self.size})"

    def __call__(self, x):
        return realize(self, x)


def realize(net: Network, x) -> np.ndarray:
    """Forward pass.  ``x`` is a vector of length input_dim or a batch (n, input_dim)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise ShapeError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    # columns are samples; CSR @ dense accumulates each row sequentially
    h = np.ascontiguousarray(h.T)
    last = net.depth - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = w @ h
        h += b[:, None]
        if l < last:
            np.maximum(h, 0.0, out=h)
    out = h.T
    return out[0].copy() if single else np.ascontiguousarray(out)


def affine_net(M, b=None) -> Network:
    M = _as_csr(M)
    if b is None:
        b = np.zeros(M.shape[0])
    return Network(M.shape[1], (M,), (b,))


def identity_net(dim: int, depth: int = 1) -> Network:
    """Exact identity of the given depth, using x = relu(x) - relu(-x)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    eye = sp.identity(dim, format="csr")
    if depth == 1:
        return affine_net(eye)
    split = sp.vstack([eye, -eye], format="csr")
    merge = sp.hstack([eye, -eye], format="csr")
    ws = [split] + [sp.identity(2 * dim, format="csr")] * (depth - 2) + [merge]
    bs = [np.zeros(2 * dim)] * (depth - 1) + [np.zeros(dim)]
    return Network(dim, tuple(ws), tuple(bs))


def _check_chain(outer: Network, inner: Network):
    if inner.output_dim != outer.input_dim:
        raise ShapeError(f"inner output {inner.output_dim} != outer input {outer.input_dim}")


def concat(outer: Network, inner: Network) -> Network:
    """outer after inner with the interface layers fused (depth L1 + L2 - 1)."""
    _check_chain(outer, inner)
    w1, b1 = outer.weights[0], outer.biases[0]
    wl, bl = inner.weights[-1], inner.biases[-1]
    fused_w = w1 @ wl
    fused_b = w1 @ bl + b1
    ws = inner.weights[:-1] + (fused_w,) + outer.weights[1:]
    bs = inner.biases[:-1] + (fused_b,) + outer.biases[1:]
    return Network(inner.input_dim, ws, bs)


def sparse_concat(outer: Network, inner: Network) -> Network:
    """outer after inner through a sign-split identity (depth L1 + L2).

    size <= 2 size(outer) + 2 size(inner).
    """
    _check_chain(outer, inner)
    wl, bl = inner.weights[-1], inner.biases[-1]
    w1, b1 = outer.weights[0], outer.biases[0]
    ws = inner.weights[:-1] + (sp.vstack([wl, -wl], format="csr"), sp.hstack([w1, -w1], format="csr")) + outer.weights[1:]
    bs = inner.biases[:-1] + (np.concatenate([bl, -bl]), b1) + outer.biases[1:]
    return Network(inner.input_dim, ws, bs)


def pad_to_depth(net: Network, depth: int) -> Network:
    if depth < net.depth:
        raise ValueError("cannot shrink a network")
    if depth == net.depth:
        return net
    return concat(identity_net(net.output_dim, depth - net.depth + 1), net)


def parallelize(nets: Sequence[Network], share_input: bool = True) -> Network:
    """Stack networks side by side.

    With ``share_input`` all members read the same input, otherwise the input is
    the concatenation of the members' inputs.  Shorter members are padded with
    identity layers; the padding cost is logged.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("parallelize needs at least one network")
    if share_input and len({n.input_dim for n in nets}) != 1:
        raise ShapeError("shared input requires equal input dimensions")
    depth = max(n.depth for n in nets)
    padded = [pad_to_depth(n, depth) for n in nets]
    extra = sum(p.size for p in padded) - sum(n.size for n in nets)
    if extra:
        log.debug("parallelize: identity padding adds %d parameters", extra)
    ws, bs = [], []
    for l in range(depth):
        blocks = [p.weights[l] for p in padded]
        if l == 0 and share_input:
            ws.append(sp.vstack(blocks, format="csr"))
        else:
            ws.append(sp.block_diag(blocks, format="csr"))
        bs.append(np.concatenate([p.biases[l] for p in padded]))
    in_dim = nets[0].input_dim if share_input else sum(n.input_dim for n in nets)
    return Network(in_dim, tuple(ws), tuple(bs))


# ---------------------------------------------------------------- serialization

def network_to_dict(net: Network) -> dict:
    layers = []
    for w, b in zip(net.weights, net.biases):
        coo = w.tocoo()
        layers.append({
            "rows": int(w.shape[0]),
            "cols": int(w.shape[1]),
            "weights": [[int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)],
            "bias": [float(v) for v in b],
        })
    return {"input_dim": int(net.input_dim), "layers": layers}


def network_from_dict(doc: dict) -> Network:
    ws, bs = [], []
    for layer in doc["layers"]:
        trip = np.asarray(layer["weights"], dtype=np.float64).reshape(-1, 3)
        w = sp.csr_matrix(
            (trip[:, 2], (trip[:, 0].astype(np.int64), trip[:, 1].astype(np.int64))),
            shape=(layer["rows"], layer["cols"]),
        )
        ws.append(w)
        bs.append(np.asarray(layer["bias"], dtype=np.float64))
    return Network(int(doc["input_dim"]), tuple(ws), tuple(bs))


# Files above this size are read line by line when they have the layout
# written by save_network; anything else goes through json.loads.
STREAM_BYTES = 32 << 20
_CHUNK = 1 << 16
_BRACKETS = str.maketrans("[]", "  ")


class _NotCanonical(Exception):
    pass


def save_network(net: Network, path) -> None:
    """Write the JSON triplet format, streaming the weights in chunks.

    json writes floats with repr, which round-trips doubles exactly.  The
    layout is canonical: one header line per layer (with an extra ``nnz``
    field), then the triplets in lines of up to 65536 entries.
    """
    with open(path, "w") as fh:
        fh.write('{"input_dim": %d, "layers": [\n' % net.input_dim)
        for l, (w, b) in enumerate(zip(net.weights, net.biases)):
            coo = w.tocoo()
            head = {"rows": int(w.shape[0]), "cols": int(w.shape[1]), "nnz": int(coo.nnz),
                    "bias": [float(v) for v in b]}
            fh.write(json.dumps(head, allow_nan=False)[:-1] + ', "weights": [\n')
            for s in range(0, coo.nnz, _CHUNK):
                part = list(zip(coo.row[s:s + _CHUNK].tolist(), coo.col[s:s + _CHUNK].tolist(),
                                coo.data[s:s + _CHUNK].tolist()))
                fh.write(json.dumps(part, allow_nan=False)[1:-1] + (",\n" if s + _CHUNK < coo.nnz else "\n"))
            fh.write("]}" + (",\n" if l < net.depth - 1 else "\n"))
        fh.write("]}\n")


def _load_streamed(path) -> Network:
    ws, bs = [], []
    with open(path) as fh:
        first = fh.readline()
        if not (first.startswith('{"input_dim": ') and first.endswith(', "layers": [\n')):
            raise _NotCanonical
        input_dim = int(first[len('{"input_dim": '):-len(', "layers": [\n')])
        tail = ', "weights": [\n'
        while True:
            line = fh.readline()
            if line == "]}\n":
                break
            if not line.endswith(tail):
                raise _NotCanonical
            head = json.loads(line[:-len(tail)] + "}")
            nnz = head.get("nnz")
            if nnz is None:
                raise _NotCanonical
            trip = np.empty((nnz, 3))
            k = 0
            for line in fh:
                if line.startswith("]}"):
                    break
                vals = np.array(line.rstrip().rstrip(",").translate(_BRACKETS).split(","), dtype=np.float64)
                m = vals.size // 3
                if vals.size % 3 or k + m > nnz:
                    raise _NotCanonical
                trip[k:k + m] = vals.reshape(m, 3)
                k += m
            if k != nnz:
                raise _NotCanonical
            ws.append(sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(np.int64), trip[:, 1].astype(np.int64))),
                                    shape=(head["rows"], head["cols"])))
            bs.append(np.asarray(head["bias"], dtype=np.float64))
            del trip
    return Network(input_dim, tuple(ws), tuple(bs))


def load_network(path) -> Network:
    if Path(path).stat().st_size > STREAM_BYTES:
        try:
            return _load_streamed(path)
        except (_NotCanonical, ValueError, KeyError):
            pass
    return network_from_dict(json.loads(Path(path).read_text()))
