"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""

from __future__ import annotations

import math

import numpy as np

from . import kernels as K
from .layers import Parameter


def clip_global_norm(params, max_norm: float = 5.0) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale  # out of place: grads may alias views
    return norm


class AdamW:
    """Decoupled weight decay, then Adam moment update.

    Defaults: lr 5e-4, betas (0.9, 0.999), eps 1e-8, weight_decay 0.01.
    Missing state is initialised to zero moments on first step.
    """

    def __init__(self, params: list[Parameter], lr: float = 5e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        b1, b2 = self.betas
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            K.adamw_update(
                p.data.reshape(-1), np.ascontiguousarray(g, dtype=p.data.dtype).reshape(-1),
                m.reshape(-1), v.reshape(-1),
                self.step_count, self.lr, b1, b2, self.eps, self.weight_decay,
            )
