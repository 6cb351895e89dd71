"""Differentiable Laplace rate model.

The rate of a (noisy or rounded) latent under a Laplace(mu, b) is the negative
log of the probability mass on its unit-width bin. Masses below 2^-16 are
floored (and counted) so the loss never goes NaN on outliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn import tensor as T
from ..nn.tensor import Tensor

__all__ = ["rate_estimate", "laplace_bin_mass", "RateStats", "B_MIN", "B_MAX", "PROB_FLOOR"]

B_MIN = 0.011  # scale floor; keeps bins away from degenerate point masses
B_MAX = 256.0
PROB_FLOOR = 2.0 ** -16
_INV_LN2 = 1.0 / math.log(2.0)


@dataclass
class RateStats:
    """Counts probability-floor events across rate evaluations."""

    underflows: int = 0
    evaluations: int = 0

    def record(self, n_under: int, n_total: int):
        self.underflows += int(n_under)
        self.evaluations += int(n_total)


def laplace_bin_mass(value: Tensor, mu: Tensor, b: Tensor) -> Tensor:
    """P(value - 0.5 < X <= value + 0.5) for X ~ Laplace(mu, b), elementwise.

    Uses the folded form around |value - mu|; branch inputs are masked with
    dummies so neither branch can overflow and poison gradients.
    """
    a = T.absolute(T.sub(value, mu))
    big = a.data >= 0.5
    one = Tensor(np.ones((), dtype=a.data.dtype))
    half = Tensor(np.asarray(0.5, dtype=a.data.dtype))

    a_big = T.where(big, a, Tensor(np.ones_like(a.data)))
    tail_step = T.exp(T.neg(T.div(one, b)))  # e^{-1/b}
    p_big = T.mul(T.mul(T.exp(T.neg(T.div(T.sub(a_big, half), b))), T.sub(one, tail_step)), half)

    a_small = T.where(big, Tensor(np.zeros_like(a.data)), a)
    lo = T.exp(T.neg(T.div(T.add(a_small, half), b)))
    hi = T.exp(T.neg(T.div(T.sub(half, a_small), b)))
    p_small = T.sub(one, T.mul(T.add(lo, hi), half))

    return T.where(big, p_big, p_small)


def rate_estimate(yq: Tensor, mu: Tensor, b: Tensor, stats: RateStats | None = None) -> Tensor:
    """Total bits to code yq under per-element Laplace(mu, b), as a scalar Tensor."""
    if yq.shape != mu.shape or yq.shape != b.shape:
        raise T.ShapeError(
            f"rate_estimate: latents {tuple(yq.shape)} vs mu {tuple(mu.shape)} vs b {tuple(b.shape)}"
        )
    p = laplace_bin_mass(yq, mu, b)
    if stats is not None:
        stats.record(int((p.data < PROB_FLOOR).sum()), p.data.size)
    p = T.maximum(p, PROB_FLOOR)
    return T.mul(T.neg(T.tsum(T.log(p))), _INV_LN2)
