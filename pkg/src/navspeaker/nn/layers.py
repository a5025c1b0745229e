"""Parameterised layers: linear maps, embeddings, LSTM/GRU cells, stacked
bidirectional LSTM, scaled-dot attention and sequence convolution.

Initialisation: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for matrices,
zeros for biases, +1.0 on the LSTM forget-gate bias slice.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import SequenceTooShort, ShapeError
from . import tensor as T
from .tensor import Tensor


class Parameter(Tensor):
    __slots__ = ("trainable",)

    def __init__(self, data, trainable: bool = True):
        super().__init__(np.asarray(data), requires_grad=trainable)
        self.trainable = trainable


class Module:
    """Minimal parameter container; children discovered via attribute walk."""

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            path = f"{prefix}.{name}" if prefix else name
            yield from _walk(path, value)

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self):
        return [p for _, p in self.named_parameters() if p.trainable]

    def count_parameters(self) -> int:
        return sum(p.data.size for p in self.trainable_parameters())

    def parameter_ledger(self):
        """(name, shape, count) rows for every trainable parameter."""
        return [
            (name, tuple(p.shape), int(p.data.size))
            for name, p in self.named_parameters()
            if p.trainable
        ]

    def state_arrays(self):
        return [(name, p.data) for name, p in self.named_parameters()]

    def load_state_arrays(self, arrays: dict):
        for name, p in self.named_parameters():
            if name not in arrays:
                raise ShapeError(f"missing parameter {name}")
            src = arrays[name]
            if tuple(src.shape) != tuple(p.shape):
                raise ShapeError(f"{name}: shape {src.shape} != {p.shape}")
            p.data = src.astype(p.data.dtype, copy=True)


def _walk(path, value):
    if isinstance(value, Parameter):
        yield path, value
    elif isinstance(value, Module):
        yield from value.named_parameters(path)
    elif isinstance(value, (list, tuple)):
        for k, item in enumerate(value):
            yield from _walk(f"{path}.{k}", item)


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float32, bias: bool = True):
        self.weight = Parameter(uniform_init(rng, (out_dim, in_dim), in_dim, dtype))
        self.bias = Parameter(np.zeros(out_dim, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[1]:
            raise ShapeError(f"linear expects (*, {self.weight.shape[1]}), got {x.shape}")
        return T.affine(x, self.weight, self.bias)


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = Parameter(uniform_init(rng, (num, dim), dim, dtype))

    def __call__(self, ids) -> Tensor:
        return T.gather_rows(self.weight, ids)


class LSTMCell(Module):
    """Gate order [i, f, g, o]; forget bias initialised to +1."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, dtype=np.float32):
        self.hidden = hidden
        self.w_x = Parameter(uniform_init(rng, (4 * hidden, in_dim), in_dim, dtype))
        self.w_h = Parameter(uniform_init(rng, (4 * hidden, hidden), hidden, dtype))
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden : 2 * hidden] = 1.0
        self.bias = Parameter(b)

    def __call__(self, x: Tensor, h: Tensor, c: Tensor):
        z = T.add(T.affine(x, self.w_x, self.bias), T.affine(h, self.w_h))
        return T.lstm_gates(z, c)

    def zero_state(self, batch: int, dtype) -> tuple[Tensor, Tensor]:
        z = np.zeros((batch, self.hidden), dtype=dtype)
        return Tensor(z.copy()), Tensor(z.copy())


class GRUCell(Module):
    """Standard GRU built from primitive ops (small models only)."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, dtype=np.float32):
        self.hidden = hidden
        self.w_zr = Parameter(uniform_init(rng, (2 * hidden, in_dim + hidden), in_dim + hidden, dtype))
        self.b_zr = Parameter(np.zeros(2 * hidden, dtype=dtype))
        self.w_n = Parameter(uniform_init(rng, (hidden, in_dim + hidden), in_dim + hidden, dtype))
        self.b_n = Parameter(np.zeros(hidden, dtype=dtype))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        d = self.hidden
        xh = T.concat([x, h], axis=1)
        zr = T.sigmoid(T.affine(xh, self.w_zr, self.b_zr))
        z = T.slice_cols(zr, 0, d)
        r = T.slice_cols(zr, d, 2 * d)
        xrh = T.concat([x, T.mul(r, h)], axis=1)
        n = T.tanh(T.affine(xrh, self.w_n, self.b_n))
        one_minus_z = T.add(T.neg(z), 1.0)
        return T.add(T.mul(one_minus_z, n), T.mul(z, h))

    def zero_state(self, batch: int, dtype) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden), dtype=dtype))


class LSTM(Module):
    """Unidirectional LSTM over a list of (1, in_dim) step tensors."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, dtype=np.float32):
        self.cell = LSTMCell(in_dim, hidden, rng, dtype)

    def __call__(self, xs, reverse: bool = False):
        seq = list(reversed(xs)) if reverse else list(xs)
        h, c = self.cell.zero_state(seq[0].shape[0], seq[0].dtype)
        out = []
        for x in seq:
            h, c = self.cell(x, h, c)
            out.append(h)
        if reverse:
            out.reverse()
        return out


class BiLSTM(Module):
    """Stacked bidirectional LSTM: layer k consumes layer k-1's concat output."""

    def __init__(self, in_dim: int, hidden: int, layers: int, rng: np.random.Generator, dtype=np.float32):
        self.levels = []
        dim = in_dim
        for _ in range(layers):
            fwd = LSTM(dim, hidden, rng, dtype)
            bwd = LSTM(dim, hidden, rng, dtype)
            self.levels.append((fwd, bwd))
            dim = 2 * hidden

    def __call__(self, xs):
        seq = list(xs)
        for fwd, bwd in self.levels:
            hf = fwd(seq)
            hb = bwd(seq, reverse=True)
            seq = [T.concat([f, b], axis=1) for f, b in zip(hf, hb)]
        return seq


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, logit_bias: Tensor | None = None):
    """softmax(q k^T / sqrt(d_k)) v; returns (context, weights).

    q: (n_q, d_k), k: (n_k, d_k), v: (n_k, d_v).  ``logit_bias`` is added to
    the raw logits before the softmax.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention d_k mismatch: {q.shape} vs {k.shape}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"attention key/value count mismatch: {k.shape} vs {v.shape}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    logits = T.mul(T.affine(q, k), scale)
    if logit_bias is not None:
        logits = T.add(logits, logit_bias)
    weights = T.softmax(logits, axis=-1)
    context = T.matmul(weights, v)
    return context, weights


class Conv1dSeq(Module):
    """Per-width valid 1-D convolution + ReLU + mean pool, outputs concatenated.

    Input (L, emb_dim); output (1, filters * len(widths)).
    """

    def __init__(self, emb_dim: int, filters: int, widths, rng: np.random.Generator, dtype=np.float32):
        self.emb_dim = emb_dim
        self.widths = tuple(widths)
        self.banks = [
            Linear(w * emb_dim, filters, rng, dtype)
            for w in self.widths
        ]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[0] < max(self.widths):
            raise SequenceTooShort(
                f"sequence length {x.shape[0]} < max filter width {max(self.widths)}"
            )
        outs = []
        for w, bank in zip(self.widths, self.banks):
            windows = T.unfold_rows(x, w)
            act = T.relu(bank(windows))
            outs.append(T.tmean(act, axis=0, keepdims=True))
        return T.concat(outs, axis=1)
