"""Latent quantization: additive-noise proxy for training, rounding for coding."""

from __future__ import annotations

import numpy as np

from ..nn.tensor import Tensor, add

__all__ = ["quantize_train", "quantize_infer", "round_half_away", "LatentRangeError", "SYMBOL_BOUND"]

SYMBOL_BOUND = 255  # quantized latents live in [-SYMBOL_BOUND, SYMBOL_BOUND]


class LatentRangeError(ValueError):
    """A latent rounded outside the coder's symbol range."""


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero: 1.5 -> 2, -1.5 -> -2, 0.5 -> 1."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def quantize_train(y: Tensor, rng: np.random.Generator) -> Tensor:
    """Additive uniform noise in (-0.5, 0.5); gradient is the identity."""
    noise = rng.uniform(-0.5, 0.5, size=y.shape).astype(y.data.dtype)
    return add(y, Tensor(noise))


def quantize_infer(y: Tensor | np.ndarray, bound: int = SYMBOL_BOUND) -> np.ndarray:
    """Deterministic rounding to integer symbols; out-of-range is an error."""
    data = y.data if isinstance(y, Tensor) else np.asarray(y)
    q = round_half_away(data)
    worst = int(np.abs(q).max()) if q.size else 0
    if worst > bound:
        raise LatentRangeError(f"latent magnitude {worst} exceeds symbol bound {bound}")
    return q
