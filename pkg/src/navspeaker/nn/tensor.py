"""Reverse-mode autodiff over dense numpy arrays.

Every differentiable operation returns a new ``Tensor`` whose backward
closure accumulates gradients into its parents' ``.grad`` buffers;
``Tensor.backward()`` walks the graph in reverse topological order starting
from a scalar.  float32 is the training precision, float64 the checking
precision; operations inherit the dtype of their inputs.

The fused LSTM gate math and row softmax route through the kernel layer
(compiled extension or numpy fallback).
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import NonScalarLoss, ShapeError
from . import kernels as K

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._bw = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    # -- backward ------------------------------------------------------
    def backward(self):
        if self.data.size != 1:
            raise NonScalarLoss(f"backward() needs a scalar, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)
                node._bw = None
                node._parents = ()


def _toposort(root: Tensor):
    """Iterative reverse topological order from root."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def _accum(t: Tensor, g: np.ndarray):
    """Accumulate out of place: the first contribution may alias ``g``.

    Ops that mutate a parent's grad buffer in place (lstm_gates, gather_rows,
    pick, slice_cols, unfold_rows) allocate that buffer themselves, so their
    parents must not also receive aliased assignments; in the current graph
    those parents have only fused consumers.
    """
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _make(data: np.ndarray, parents, bw) -> Tensor:
    rg = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=rg)
    if rg:
        out._parents = tuple(parents)
        out._bw = bw
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ---------------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    data = a.data + b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    data = a.data - b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    data = a.data * b.data

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), bw)


def div(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    data = a.data / b.data

    def bw(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(data, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(g):
        _accum(a, -g)

    return _make(-a.data, (a,), bw)


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w.T (+ b) as one node: the linear-layer and attention-logit core."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"affine expects (n, d) @ (m, d).T, got {x.shape}, {w.shape}")
    data = x.data @ w.data.T
    if b is not None:
        data = data + b.data

    def bw(g):
        _accum(x, g @ w.data)
        _accum(w, g.T @ x.data)
        if b is not None:
            _accum(b, _unbroadcast(g, b.shape))

    parents = (x, w) if b is None else (x, w, b)
    return _make(data, parents, bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g.T)

    return _make(a.data.T, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape

    def bw(g):
        _accum(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), bw)


# -- reductions ----------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- elementwise nonlinearities -------------------------------------------


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - y * y))

    return _make(y, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    y = K.sigmoid(np.ascontiguousarray(a.data))

    def bw(g):
        _accum(a, g * y * (1.0 - y))

    return _make(y, (a,), bw)


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)

    def bw(g):
        _accum(a, g * (a.data > 0))

    return _make(y, (a,), bw)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def bw(g):
        _accum(a, g * y)

    return _make(y, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g / a.data)

    return _make(np.log(a.data), (a,), bw)


def clamp(a: Tensor, lo=None, hi=None) -> Tensor:
    y = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi

    def bw(g):
        _accum(a, g * inside)

    return _make(y, (a,), bw)


# -- softmax family -------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.ndim == 2 and axis in (-1, 1):
        y = K.softmax2d(np.ascontiguousarray(a.data))
    else:
        m = a.data.max(axis=axis, keepdims=True)
        e = np.exp(a.data - m)
        y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, y * (g - dot))

    return _make(y, (a,), bw)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse

    def bw(g):
        _accum(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    return _make(y, (a,), bw)


# -- structural ops -------------------------------------------------------


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, s, e in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(s, e)
            _accum(t, g[tuple(idx)])

    return _make(data, tensors, bw)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    data = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        for k, t in enumerate(tensors):
            _accum(t, np.take(g, k, axis=axis))

    return _make(data, tensors, bw)


def gather_rows(a: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor (embedding lookup); scatter-add backward."""
    idx = np.asarray(idx, dtype=np.intp)
    data = a.data[idx]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _make(data, (a,), bw)


def pick(a: Tensor, rows, cols) -> Tensor:
    """a[rows[k], cols[k]] for each k; returns a 1-D tensor."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    data = a.data[rows, cols]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, (rows, cols), g)

    return _make(data, (a,), bw)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous column slice of a 2-D tensor."""
    data = a.data[:, start:stop]

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, start:stop] += g

    return _make(data.copy(), (a,), bw)


def unfold_rows(a: Tensor, width: int) -> Tensor:
    """Sliding windows over rows: (L, D) -> (L - width + 1, width * D)."""
    n, d = a.shape
    count = n - width + 1
    data = np.empty((count, width * d), dtype=a.dtype)
    for k in range(count):
        data[k] = a.data[k : k + width].reshape(-1)

    def bw(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            for k in range(count):
                a.grad[k : k + width] += g[k].reshape(width, d)

    return _make(data, (a,), bw)


# -- fused LSTM gate op ---------------------------------------------------


def lstm_gates(z: Tensor, c_prev: Tensor):
    """(h, c) from pre-activations z (B, 4D) and previous cell c_prev (B, D).

    Built as two nodes, c = f(z, c_prev) and h = f(z, c), so the fused
    backward kernels receive the right upstream gradients in topo order.
    """
    h_d, c_d, gates, tc = K.lstm_fwd(
        np.ascontiguousarray(z.data), np.ascontiguousarray(c_prev.data)
    )
    d = c_prev.shape[1]

    def bw_c(gc):
        dz_ifg, dc_prev = K.lstm_bwd_c(np.ascontiguousarray(gc), gates, np.ascontiguousarray(c_prev.data))
        if z.requires_grad:
            if z.grad is None:
                z.grad = np.zeros_like(z.data)
            z.grad[:, : 3 * d] += dz_ifg
        _accum(c_prev, dc_prev)

    c_t = _make(c_d, (z, c_prev), bw_c)

    def bw_h(gh):
        dz_o, dc = K.lstm_bwd_h(np.ascontiguousarray(gh), gates, tc)
        if z.requires_grad:
            if z.grad is None:
                z.grad = np.zeros_like(z.data)
            z.grad[:, 3 * d :] += dz_o
        _accum(c_t, dc)

    h_t = _make(h_d, (z, c_t), bw_h)
    return h_t, c_t
