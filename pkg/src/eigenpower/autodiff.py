"""Expression graphs with batched second-order spatial jets and parameter gradients.

The engine evaluates a scalar-valued computation graph u(x; theta) on a batch
of points and propagates, alongside each node's value, its spatial gradient
and Laplacian (a "jet").  A reverse sweep over the recorded jet computation
then yields d(scalar)/d(theta) for losses that contain values, gradients or
Laplacians of u.  Only diagonal second derivatives are carried, so the cost
per node is O(d) in the space dimension instead of O(d^2) for a full Hessian.

Buffer shapes, with N points, d space dimensions and node width k:

    value     (B, k)        B in {1, N}; 1 means constant across the batch
    gradient  (B, d, k)
    laplacian (B, k)

Jet rules for an elementwise map f with derivatives f1, f2, f3:

    v = f(u);  g = f1(u) * gu;  l = f1(u) * lu + f2(u) * sum_d gu_d^2

and the reverse sweep differentiates these rules themselves, which is where
f3 enters.  Aggregates over the batch (``mean``) are spatially constant, so
their jets are zero by definition.

Third and higher spatial derivatives are out of scope: extracting a gradient
component or Laplacian yields a value-only node that cannot be differentiated
spatially again.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

_ids = itertools.count()

# ops whose spatial jets are defined (everything except the two extractions)
_UNARY = ("tanh", "sin", "cos", "exp", "square", "sqrt", "recip")
_EXTRACT = ("grad_comp", "lap")


class Expr:
    """One immutable node of an expression graph.

    Nodes are created through the module-level builder functions and the
    arithmetic operators; children always exist before their parents, so
    creation order is a topological order.
    """

    __slots__ = ("id", "op", "args", "width", "batched", "payload",
                 "has_jet", "volatile")

    def __init__(self, op, args=(), width=1, batched=True, payload=None):
        self.id = next(_ids)
        self.op = op
        self.args = tuple(args)
        self.width = int(width)
        self.batched = bool(batched)
        self.payload = payload
        if op in _EXTRACT:
            self.has_jet = False
        elif op == "mean":
            self.has_jet = True
        else:
            self.has_jet = all(a.has_jet for a in self.args)
        self.volatile = (op in ("param", "data")
                         or (op == "affine" and payload[0] == "param")
                         or any(a.volatile for a in self.args))

    # -- arithmetic sugar ---------------------------------------------------

    def _lift(self, other):
        if isinstance(other, Expr):
            return other
        return const(other)

    def __add__(self, other):
        return _binary("add", self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return _binary("sub", self, self._lift(other))

    def __rsub__(self, other):
        return _binary("sub", self._lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return _binary("mul", self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return _binary("mul", self, recip(other))

    def __rtruediv__(self, other):
        return _binary("mul", self._lift(other), recip(self))

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Expr<{self.op}#{self.id} w={self.width}>"


@dataclass
class SpatialJet:
    """Value, spatial gradient and Laplacian of a scalar expression at a point."""

    value: float
    gradient: np.ndarray
    laplacian: float


# -- builders ----------------------------------------------------------------


def inputs(d):
    """The coordinate vector leaf: a width-d node reading the batch points."""
    if d < 1:
        raise ShapeError(f"input dimension must be >= 1, got {d}")
    return Expr("inputs", width=d)


def const(value):
    """A constant scalar or vector, identical for every point."""
    arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if arr.ndim != 1:
        raise ShapeError(f"const expects a scalar or 1-d vector, got shape {arr.shape}")
    return Expr("const", width=arr.size, batched=False, payload=arr.reshape(1, -1))

def data(key, width=1):
    """A per-point array bound at evaluation time; treated as spatially constant
    and detached from parameters."""
    return Expr("data", width=width, payload=key)


def param(offset, length=1):
    """A slice of the flat parameter vector, constant across the batch."""
    return Expr("param", width=length, batched=False, payload=(int(offset), int(length)))


def take(x, i):
    """Column i of a vector-valued node."""
    if not 0 <= i < x.width:
        raise ShapeError(f"take index {i} out of range for width {x.width}")
    return Expr("take", (x,), width=1, batched=x.batched, payload=int(i))


def stack(parts):
    """Concatenate nodes along the width axis."""
    parts = tuple(parts)
    width = sum(p.width for p in parts)
    offs, o = [], 0
    for p in parts:
        offs.append(o)
        o += p.width
    return Expr("stack", parts, width=width,
                batched=any(p.batched for p in parts), payload=tuple(offs))


def affine(x, weight, bias):
    """y = x @ W.T + b with constant W (n_out, n_in) and b (n_out,)."""
    W = np.asarray(weight, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != x.width or b.shape != (W.shape[0],):
        raise ShapeError(
            f"affine shapes W{W.shape} b{b.shape} incompatible with input width {x.width}")
    return Expr("affine", (x,), width=W.shape[0], batched=x.batched,
                payload=("const", W, b))


def affine_slot(x, w_offset, b_offset, n_out):
    """y = x @ W.T + b with W, b read from the flat parameter vector.

    W occupies ``n_out * x.width`` entries row-major at ``w_offset`` and b
    the ``n_out`` entries at ``b_offset``.
    """
    return Expr("affine", (x,), width=n_out, batched=x.batched,
                payload=("param", int(w_offset), int(b_offset), int(n_out), x.width))


def scale(x, c):
    return Expr("scale", (x,), width=x.width, batched=x.batched, payload=float(c))


def _binary(op, a, b):
    if a.width != b.width and 1 not in (a.width, b.width):
        raise ShapeError(f"width mismatch in {op}: {a.width} vs {b.width}")
    return Expr(op, (a, b), width=max(a.width, b.width),
                batched=a.batched or b.batched)


def _unary(op, x):
    return Expr(op, (x,), width=x.width, batched=x.batched)


def tanh(x):
    return _unary("tanh", x)

def sin(x):
    return _unary("sin", x)

def cos(x):
    return _unary("cos", x)

def exp(x):
    return _unary("exp", x)

def square(x):
    return _unary("square", x)

def sqrt(x):
    return _unary("sqrt", x)

def recip(x):
    return _unary("recip", x)


def mean(x):
    """Mean over the batch axis; the result is spatially constant."""
    return Expr("mean", (x,), width=x.width, batched=False)


def rms(x):
    """Root mean square over the batch: the discretized norm of a sample vector."""
    return sqrt(mean(square(x)))


def grad_component(x, i):
    """The i-th spatial derivative of x, as a value-only node."""
    if not x.has_jet:
        raise ShapeError(
            "spatial derivative of a derivative result: third order is unsupported")
    return Expr("grad_comp", (x,), width=x.width, batched=True, payload=int(i))


def laplacian(x):
    """The Laplacian of x, as a value-only node."""
    if not x.has_jet:
        raise ShapeError(
            "Laplacian of a derivative result: higher order is unsupported")
    return Expr("lap", (x,), width=x.width, batched=True)


# -- unary derivative tables ---------------------------------------------------
# value and first three derivatives, as functions of the input value array


def _tanh_d(v):
    t = np.tanh(v)
    f1 = 1.0 - t * t
    return t, f1, -2.0 * t * f1, -2.0 * f1 * (1.0 - 3.0 * t * t)

def _sin_d(v):
    s, c = np.sin(v), np.cos(v)
    return s, c, -s, -c

def _cos_d(v):
    s, c = np.sin(v), np.cos(v)
    return c, -s, -c, s

def _exp_d(v):
    e = np.exp(v)
    return e, e, e, e

def _square_d(v):
    return v * v, 2.0 * v, np.full_like(v, 2.0), np.zeros_like(v)

def _sqrt_d(v):
    r = np.sqrt(v)
    return r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v)

def _recip_d(v):
    r = 1.0 / v
    r2 = r * r
    return r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2

_UNARY_D = {
    "tanh": _tanh_d, "sin": _sin_d, "cos": _cos_d, "exp": _exp_d,
    "square": _square_d, "sqrt": _sqrt_d, "recip": _recip_d,
}


# -- evaluation ----------------------------------------------------------------


class _Plan:
    """Topological schedule for a set of roots plus static analysis flags."""

    def __init__(self, roots, jet_roots=()):
        seen = {}
        stack = list(roots) + list(jet_roots)
        while stack:
            node = stack.pop()
            if node.id in seen:
                continue
            seen[node.id] = node
            stack.extend(node.args)
        self.nodes = [seen[i] for i in sorted(seen)]
        self.roots = tuple(roots)

        # nodes whose jets must be computed: parents of extractions, requested
        # jet roots, and transitively their parents
        need = set()
        for node in self.nodes:
            if node.op in _EXTRACT:
                need.add(node.args[0].id)
        for node in jet_roots:
            if not node.has_jet:
                raise ShapeError(f"node {node!r} carries no spatial jet")
            need.add(node.id)
        for node in reversed(self.nodes):
            if node.id in need:
                for a in node.args:
                    need.add(a.id)
        self.need_jet = need

        self.input_nodes = [n for n in self.nodes if n.op == "inputs"]
        widths = {n.width for n in self.input_nodes}
        if len(widths) > 1:
            raise ShapeError(f"conflicting input widths in one graph: {sorted(widths)}")
        self.in_width = widths.pop() if widths else 0
        self.n_params = 0
        for n in self.nodes:
            if n.op == "param":
                off, k = n.payload
                self.n_params = max(self.n_params, off + k)
            elif n.op == "affine" and n.payload[0] == "param":
                _, w_off, b_off, n_out, n_in = n.payload
                self.n_params = max(self.n_params, w_off + n_out * n_in,
                                    b_off + n_out)


def _reduce_like(arr, shape):
    """Sum over axes where ``shape`` has extent 1, undoing a broadcast."""
    if arr.shape == shape:
        return arr
    axes = tuple(ax for ax, s in enumerate(shape) if s == 1 and arr.shape[ax] != 1)
    return arr.sum(axis=axes, keepdims=True)


def _dot_space(a, b):
    """(a * b) summed over the space axis (axis 1), unrolled for small d."""
    d = a.shape[1]
    if d == 1:
        return a[:, 0, :] * b[:, 0, :]
    out = a[:, 0, :] * b[:, 0, :]
    for i in range(1, d):
        out += a[:, i, :] * b[:, i, :]
    return out


class Session:
    """Repeated evaluation of one graph over a fixed point set.

    Buffers of nodes that depend on neither parameters nor bound data are
    computed once and reused across forwards, so per-epoch work touches only
    the parameter-dependent part of the graph.
    """

    def __init__(self, roots, points):
        roots = [roots] if isinstance(roots, Expr) else list(roots)
        self._plan = _Plan(roots)
        if points is None:
            points = np.zeros((1, 0))
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ShapeError(f"points must be (N, d), got shape {self.points.shape}")
        self.n, self.d = self.points.shape
        if self._plan.input_nodes and self._plan.in_width != self.d:
            raise ShapeError(
                f"graph expects points of dimension {self._plan.in_width}, got {self.d}")
        self._val = {}
        self._grad = {}
        self._lap = {}
        self._dtab = {}   # stashed unary derivative tables for the reverse sweep
        self._gsq = {}    # stashed sum_d (grad_d)^2 per unary node
        self._adj = ({}, {}, {})  # pooled adjoint buffers: value, gradient, laplacian
        self._static_done = False
        self._volatile_nodes = [n for n in self._plan.nodes if n.volatile]
        self.params = None

    def request_jet(self, expr):
        """Ensure jets of ``expr`` are computed on subsequent forwards."""
        self._plan = _Plan(self._plan.roots, jet_roots=[expr])
        self._volatile_nodes = [n for n in self._plan.nodes if n.volatile]
        self._static_done = False

    # -- forward -------------------------------------------------------------

    def forward(self, params=None, bindings=None):
        params = np.zeros(0) if params is None else np.asarray(params, dtype=np.float64)
        if params.size < self._plan.n_params:
            raise ShapeError(
                f"graph needs at least {self._plan.n_params} parameters, got {params.size}")
        self.params = params
        bindings = bindings or {}
        nodes = self._volatile_nodes if self._static_done else self._plan.nodes
        for node in nodes:
            self._forward_node(node, params, bindings)
        self._static_done = True
        return self

    def value(self, expr):
        v = self._val[expr.id]
        return np.broadcast_to(v, (self.n, expr.width)) if v.shape[0] == 1 else v

    def jet(self, expr):
        """(value, gradient, laplacian) arrays of a jet node, batch-expanded."""
        if expr.id not in self._grad:
            raise ShapeError(f"jets of {expr!r} were not computed in this session")
        n, d, k = self.n, self.d, expr.width
        return (self.value(expr),
                np.broadcast_to(self._grad[expr.id], (n, d, k)),
                np.broadcast_to(self._lap[expr.id], (n, k)))

    def _forward_node(self, node, params, bindings):
        op = node.op
        want_jet = node.id in self._plan.need_jet
        val = grad = lap = None

        if op == "inputs":
            val = self.points
            if want_jet:
                grad = np.eye(self.d)[None, :, :]
                lap = np.zeros((1, self.d))
        elif op == "const":
            val = node.payload
            if want_jet:
                grad = np.zeros((1, self.d, node.width))
                lap = np.zeros((1, node.width))
        elif op == "data":
            arr = bindings.get(node.payload)
            if arr is None:
                raise ShapeError(f"no binding supplied for data node {node.payload!r}")
            val = np.asarray(arr, dtype=np.float64).reshape(-1, node.width)
            if val.shape[0] != self.n:
                raise ShapeError(
                    f"binding {node.payload!r} has {val.shape[0]} rows, expected {self.n}")
            if want_jet:
                grad = np.zeros((1, self.d, node.width))
                lap = np.zeros((1, node.width))
        elif op == "param":
            off, k = node.payload
            val = params[off:off + k].reshape(1, k)
            if want_jet:
                grad = np.zeros((1, self.d, k))
                lap = np.zeros((1, k))
        elif op == "take":
            i = node.payload
            pv = self._val[node.args[0].id]
            val = pv[:, i:i + 1]
            if want_jet:
                grad = self._grad[node.args[0].id][:, :, i:i + 1]
                lap = self._lap[node.args[0].id][:, i:i + 1]
        elif op == "stack":
            parts = node.args
            vs = [np.broadcast_to(self._val[p.id], (self._val[p.id].shape[0], p.width))
                  for p in parts]
            b = max(v.shape[0] for v in vs)
            val = np.concatenate([np.broadcast_to(v, (b, v.shape[1])) for v in vs], axis=1)
            if want_jet:
                gs = [self._grad[p.id] for p in parts]
                bg = max(g.shape[0] for g in gs)
                grad = np.concatenate(
                    [np.broadcast_to(g, (bg, self.d, g.shape[2])) for g in gs], axis=2)
                ls = [self._lap[p.id] for p in parts]
                bl = max(x.shape[0] for x in ls)
                lap = np.concatenate(
                    [np.broadcast_to(x, (bl, x.shape[1])) for x in ls], axis=1)
        elif op == "affine":
            W, b = self._affine_wb(node, params)
            x = node.args[0]
            val = self._val[x.id] @ W.T + b
            if want_jet:
                gx = self._grad[x.id]
                bg, dd, ni = gx.shape
                grad = (gx.reshape(bg * dd, ni) @ W.T).reshape(bg, dd, node.width)
                lap = self._lap[x.id] @ W.T
        elif op == "scale":
            c = node.payload
            x = node.args[0]
            val = c * self._val[x.id]
            if want_jet:
                grad = c * self._grad[x.id]
                lap = c * self._lap[x.id]
        elif op in ("add", "sub"):
            a, b = node.args
            sgn = 1.0 if op == "add" else -1.0
            val = self._val[a.id] + sgn * self._val[b.id]
            if want_jet:
                grad = self._grad[a.id] + sgn * self._grad[b.id]
                lap = self._lap[a.id] + sgn * self._lap[b.id]
        elif op == "mul":
            a, b = node.args
            va, vb = self._val[a.id], self._val[b.id]
            val = va * vb
            if want_jet:
                ga, gb = self._grad[a.id], self._grad[b.id]
                la, lb = self._lap[a.id], self._lap[b.id]
                grad = ga * vb[:, None, :] + va[:, None, :] * gb
                lap = la * vb + 2.0 * _dot_space(ga, gb) + va * lb
        elif op in _UNARY_D:
            x = node.args[0]
            vu = self._val[x.id]
            tab = _UNARY_D[op](vu)
            if node.volatile:
                self._dtab[node.id] = tab
            f0, f1, f2, _ = tab
            val = f0
            if want_jet:
                gu, lu = self._grad[x.id], self._lap[x.id]
                grad = f1[:, None, :] * gu
                su = _dot_space(gu, gu)
                if node.volatile:
                    self._gsq[node.id] = su
                lap = f1 * lu + f2 * su
        elif op == "mean":
            x = node.args[0]
            pv = self._val[x.id]
            val = pv.sum(axis=0, keepdims=True) * (1.0 / pv.shape[0])
            if want_jet:
                grad = np.zeros((1, self.d, node.width))
                lap = np.zeros((1, node.width))
        elif op == "grad_comp":
            x = node.args[0]
            val = self._grad[x.id][:, node.payload, :]
        elif op == "lap":
            val = self._lap[node.args[0].id]
        else:
            raise ShapeError(f"unknown op {op!r}")

        self._val[node.id] = val
        if want_jet:
            self._grad[node.id] = grad
            self._lap[node.id] = lap

    def _affine_wb(self, node, params):
        if node.payload[0] == "const":
            return node.payload[1], node.payload[2]
        _, w_off, b_off, n_out, n_in = node.payload
        W = params[w_off:w_off + n_out * n_in].reshape(n_out, n_in)
        return W, params[b_off:b_off + n_out]

    # -- reverse sweep ---------------------------------------------------------

    def backward(self, seeds):
        """Accumulate d(seeded scalars)/d(params) by reverse sweep.

        ``seeds`` maps Expr -> adjoint array of its value buffer (broadcastable
        to (N, width)).  Returns the gradient for the full parameter vector of
        the last forward.
        """
        if self.params is None:
            raise ShapeError("backward called before forward")
        pgrad = np.zeros_like(self.params)
        av, ag, al = self._adj
        for store in self._adj:
            for buf in store.values():
                buf.fill(0.0)
        for expr, seed in seeds.items():
            arr = np.asarray(seed, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            self._put(av, self._val[expr.id].shape, expr.id, arr)

        for node in reversed(self._volatile_nodes):
            vbar = av.get(node.id)
            gbar = ag.get(node.id)
            lbar = al.get(node.id)
            if vbar is None and gbar is None and lbar is None:
                continue
            self._backward_node(node, vbar, gbar, lbar, av, ag, al, pgrad)
        return pgrad

    def _backward_node(self, node, vbar, gbar, lbar, av, ag, al, pgrad):
        op = node.op

        def acc_v(child, arr):
            if child.volatile:
                self._put(av, self._val[child.id].shape, child.id, arr)

        def acc_g(child, arr):
            if child.volatile:
                self._put(ag, self._grad[child.id].shape, child.id, arr)

        def acc_l(child, arr):
            if child.volatile:
                self._put(al, self._lap[child.id].shape, child.id, arr)

        if op == "param":
            off, k = node.payload
            if vbar is not None:
                pgrad[off:off + k] += vbar.sum(axis=0)
            return
        if op in ("inputs", "const", "data"):
            return
        if op == "take":
            x, i = node.args[0], node.payload
            if vbar is not None and x.volatile:
                self._put_col(av, self._val[x.id].shape, x.id, vbar, i, axis=1)
            if gbar is not None and x.volatile:
                self._put_col(ag, self._grad[x.id].shape, x.id, gbar, i, axis=2)
            if lbar is not None and x.volatile:
                self._put_col(al, self._lap[x.id].shape, x.id, lbar, i, axis=1)
            return
        if op == "stack":
            for p, off in zip(node.args, node.payload):
                if not p.volatile:
                    continue
                if vbar is not None:
                    acc_v(p, vbar[:, off:off + p.width])
                if gbar is not None:
                    acc_g(p, gbar[:, :, off:off + p.width])
                if lbar is not None:
                    acc_l(p, lbar[:, off:off + p.width])
            return
        if op == "affine":
            x = node.args[0]
            W, _ = self._affine_wb(node, self.params)
            if x.volatile:
                if vbar is not None:
                    acc_v(x, vbar @ W)
                if gbar is not None:
                    bg, dd, no = gbar.shape
                    acc_g(x, (gbar.reshape(bg * dd, no) @ W).reshape(bg, dd, x.width))
                if lbar is not None:
                    acc_l(x, lbar @ W)
            if node.payload[0] == "param":
                _, w_off, b_off, n_out, n_in = node.payload
                dW = np.zeros((n_out, n_in))
                if vbar is not None:
                    vx = np.broadcast_to(self._val[x.id], (vbar.shape[0], n_in))
                    dW += vbar.T @ vx
                    pgrad[b_off:b_off + n_out] += vbar.sum(axis=0)
                if gbar is not None:
                    bg, dd, no = gbar.shape
                    gx = np.broadcast_to(self._grad[x.id], (bg, dd, n_in))
                    dW += gbar.reshape(bg * dd, no).T @ gx.reshape(bg * dd, n_in)
                if lbar is not None:
                    lx = np.broadcast_to(self._lap[x.id], (lbar.shape[0], n_in))
                    dW += lbar.T @ lx
                pgrad[w_off:w_off + n_out * n_in] += dW.ravel()
            return
        if op == "scale":
            x, c = node.args[0], node.payload
            if vbar is not None:
                acc_v(x, c * vbar)
            if gbar is not None:
                acc_g(x, c * gbar)
            if lbar is not None:
                acc_l(x, c * lbar)
            return
        if op in ("add", "sub"):
            a, b = node.args
            sgn = 1.0 if op == "add" else -1.0
            if vbar is not None:
                acc_v(a, vbar)
                acc_v(b, sgn * vbar)
            if gbar is not None:
                acc_g(a, gbar)
                acc_g(b, sgn * gbar)
            if lbar is not None:
                acc_l(a, lbar)
                acc_l(b, sgn * lbar)
            return
        if op == "mul":
            a, b = node.args
            va, vb = self._val[a.id], self._val[b.id]
            has_jet_bufs = node.id in self._plan.need_jet
            ga = self._grad[a.id] if has_jet_bufs else None
            gb = self._grad[b.id] if has_jet_bufs else None
            la = self._lap[a.id] if has_jet_bufs else None
            lb = self._lap[b.id] if has_jet_bufs else None
            if vbar is not None:
                acc_v(a, vbar * vb)
                acc_v(b, vbar * va)
            if gbar is not None:
                acc_g(a, gbar * vb[:, None, :])
                acc_v(a, _dot_space(gbar, gb))
                acc_g(b, gbar * va[:, None, :])
                acc_v(b, _dot_space(gbar, ga))
            if lbar is not None:
                acc_v(a, lbar * lb)
                acc_l(a, lbar * vb)
                acc_g(a, 2.0 * lbar[:, None, :] * gb)
                acc_v(b, lbar * la)
                acc_l(b, lbar * va)
                acc_g(b, 2.0 * lbar[:, None, :] * ga)
            return
        if op in _UNARY_D:
            x = node.args[0]
            if not x.volatile:
                return
            _, f1, f2, f3 = self._dtab[node.id]
            if vbar is not None:
                acc_v(x, vbar * f1)
            if gbar is not None:
                gu = self._grad[x.id]
                acc_g(x, gbar * f1[:, None, :])
                acc_v(x, f2 * _dot_space(gbar, gu))
            if lbar is not None:
                gu, lu = self._grad[x.id], self._lap[x.id]
                su = self._gsq[node.id]
                acc_v(x, lbar * (f2 * lu + f3 * su))
                acc_l(x, lbar * f1)
                acc_g(x, (2.0 * lbar * f2)[:, None, :] * gu)
            return
        if op == "mean":
            x = node.args[0]
            if vbar is not None and x.volatile:
                nb = self._val[x.id].shape[0]
                acc_v(x, np.broadcast_to(vbar / nb, self._val[x.id].shape))
            return
        if op == "grad_comp":
            x, i = node.args[0], node.payload
            if vbar is not None and x.volatile:
                self._put_col(ag, self._grad[x.id].shape, x.id, vbar, i, axis=1,
                              grad_col=True)
            return
        if op == "lap":
            x = node.args[0]
            if vbar is not None and x.volatile:
                self._put(al, self._lap[x.id].shape, x.id, vbar)
            return
        raise ShapeError(f"no backward rule for op {op!r}")

    def _put(self, store, shape, node_id, arr):
        arr = _reduce_like(arr, shape)
        cur = store.get(node_id)
        if cur is None:
            cur = store[node_id] = np.zeros(shape)
        cur += arr

    def _put_col(self, store, shape, node_id, arr, i, axis, grad_col=False):
        cur = store.get(node_id)
        if cur is None:
            cur = store[node_id] = np.zeros(shape)
        if grad_col:
            # adjoint of a gradient component: lands in grad buffer column i of axis 1
            view = cur[:, i, :]
            view += _reduce_like(arr, view.shape)
        elif axis == 1:
            view = cur[:, i:i + 1]
            view += _reduce_like(arr, view.shape)
        else:
            view = cur[:, :, i:i + 1]
            view += _reduce_like(arr, view.shape)


# -- one-shot convenience API ---------------------------------------------------


def _single_point(point):
    pt = np.atleast_1d(np.asarray(point, dtype=np.float64))
    return pt.reshape(1, -1)


def evaluate(expr, point, params=None):
    """u(x; theta) at one point."""
    sess = Session([expr], _single_point(point))
    sess.forward(params)
    val = sess.value(expr)
    return float(val[0, 0]) if expr.width == 1 else val[0]


def evaluate_many(expr, points, params=None, bindings=None):
    """Values of a width-1 expression over a batch, as a flat (N,) array."""
    sess = Session([expr], np.asarray(points, dtype=np.float64))
    sess.forward(params, bindings)
    return sess.value(expr)[:, 0].copy()


def spatial_jet(expr, point, params=None):
    """Value, gradient and Laplacian of a scalar expression at one point."""
    if expr.width != 1:
        raise ShapeError(f"spatial_jet expects a scalar expression, width={expr.width}")
    sess = Session([expr], _single_point(point))
    sess.request_jet(expr)
    sess.forward(params)
    v, g, l = sess.jet(expr)
    return SpatialJet(float(v[0, 0]), g[0, :, 0].copy(), float(l[0, 0]))


def param_gradient(scalar_expr, params, points=None):
    """d(scalar)/d(theta) for a batch-constant scalar expression.

    The expression must reduce to a single value (width 1 and not batched),
    typically a mean over the sample batch.
    """
    if scalar_expr.width != 1 or scalar_expr.batched:
        raise ShapeError("param_gradient needs a scalar (width-1, batch-reduced) root")
    params = np.asarray(params, dtype=np.float64)
    sess = Session([scalar_expr],
                   None if points is None else np.asarray(points, dtype=np.float64))
    sess.forward(params)
    return sess.backward({scalar_expr: np.ones((1, 1))})
