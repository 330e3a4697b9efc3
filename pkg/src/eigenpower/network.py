"""Multilayer perceptron trial functions: tanh hidden layers, linear scalar output."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


@dataclass(frozen=True)
class Mlp:
    """A fully connected network with tanh on every hidden layer.

    ``weights[i]`` has shape (layer_sizes[i+1], layer_sizes[i]) and acts as
    ``h @ W.T + b``.  The flat parameter layout is W0 row-major, b0, W1, b1,
    and so on; this order is shared by :func:`forward_expr`, :meth:`flatten`
    and the checkpoint files.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @property
    def input_width(self):
        return self.layer_sizes[0]

    def flatten(self):
        """Parameters as one flat vector in canonical order."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_params(self, flat):
        """A copy of this network with parameters taken from a flat vector."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got {flat.shape}")
        ws, bs, off = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(flat[off:off + w.size].reshape(w.shape).copy())
            off += w.size
            bs.append(flat[off:off + b.size].copy())
            off += b.size
        return Mlp(self.layer_sizes, tuple(ws), tuple(bs))

    def forward_values(self, points):
        """Plain numeric forward pass, (N, d) -> (N,).

        Kept independent of the expression graph so the two routes can be
        checked against each other.
        """
        h = np.asarray(points, dtype=np.float64)
        if h.ndim == 1:
            h = h.reshape(1, -1)
        if h.shape[1] != self.input_width:
            raise ShapeError(
                f"points have width {h.shape[1]}, network expects {self.input_width}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.tanh(h)
        return h[:, 0]


def init_mlp(layer_sizes, seed):
    """Glorot-uniform weights (bound sqrt(6/(n_in+n_out))), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ShapeError(f"layer sizes must be >= 2 entries of positive ints, got {sizes}")
    if sizes[-1] != 1:
        raise ShapeError(f"output width must be 1, got {sizes[-1]}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ws, bs = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        ws.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        bs.append(np.zeros(n_out))
    return Mlp(sizes, tuple(ws), tuple(bs))


def forward_expr(mlp, input_exprs):
    """Expression graph of the scalar network output.

    ``input_exprs`` is either one vector-valued node of the network's input
    width or a sequence of width-1 nodes to be stacked.
    """
    if isinstance(input_exprs, ad.Expr):
        x = input_exprs
    else:
        x = ad.stack(list(input_exprs))
    if x.width != mlp.input_width:
        raise ShapeError(
            f"network expects input width {mlp.input_width}, got {x.width}")
    h = x
    off = 0
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        n_out, n_in = w.shape
        h = ad.affine_slot(h, off, off + n_out * n_in, n_out)
        off += n_out * n_in + n_out
        if i < last:
            h = ad.tanh(h)
    return h


def save_mlp(mlp, path):
    """Checkpoint as JSON: layer sizes plus the flat parameter vector.

    Python's JSON float formatting round-trips IEEE doubles exactly, so a
    save/load cycle is bit-identical.
    """
    payload = {
        "layer_sizes": list(mlp.layer_sizes),
        "params": [float(v) for v in mlp.flatten()],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_mlp(path):
    with open(path) as fh:
        payload = json.load(fh)
    sizes = tuple(payload["layer_sizes"])
    mlp = init_mlp(sizes, seed=0)
    return mlp.with_params(np.asarray(payload["params"], dtype=np.float64))
