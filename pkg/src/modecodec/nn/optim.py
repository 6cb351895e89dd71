"""Adam optimizer with a step-decay learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .layers import Parameter
from .tensor import NumericsError

__all__ = ["Adam", "TrainingError"]


class TrainingError(RuntimeError):
    """Raised when a training step goes numerically bad; names the parameter."""


class Adam:
    """Adaptive-moment optimizer.

    Parameters flagged trainable=False are skipped entirely: neither their
    values nor their moment accumulators move.
    """

    def __init__(self, named_params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for name, p in self.params:
            if not p.trainable or p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter '{name}'") from NumericsError(name)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= (self.lr * update).astype(p.data.dtype)

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None


def lr_at_epoch(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Base rate divided by 5 at 50% and again at 75% of the total schedule."""
    lr = base_lr
    if total_epochs > 0:
        if epoch >= 0.5 * total_epochs:
            lr /= 5.0
        if epoch >= 0.75 * total_epochs:
            lr /= 5.0
    return lr
