"""Mode-selection network.

A lightweight transform coder that looks at (previous frame, current frame)
and transmits a per-pixel weighting alpha in [0, 1]: 0 means the pixel is
copied from the prediction, 1 means it goes through the content coder. The
synthesis output gets a 0.5 bias before clipping, and its final layer is
zero-initialized, so a fresh model emits alpha = 0.5 everywhere.
"""

from __future__ import annotations

import numpy as np

from ..entropy.cdf import CdfTable
from ..entropy.laplace import RateStats
from ..nn import tensor as T
from ..nn.layers import Module
from ..nn.tensor import ShapeError, Tensor
from .blocks import CoderArch, HyperCoder

__all__ = ["ModeNet", "modenet_arch"]

ALPHA_BIAS = 0.5


def modenet_arch(f: int = 32, n: int = 32, hyper_f: int = 16,
                 strides: tuple = (2, 2, 2, 2), context: bool = False) -> CoderArch:
    """Default ladder sized to land near 2e5 parameters."""
    return CoderArch(
        in_ch=6, out_ch=1, f=f, n=n, strides=strides,
        hyper_f=hyper_f, activation="leaky", context=context, zero_final=True,
    )


class ModeNet(Module):
    def __init__(self, arch: CoderArch | None = None, rng=None,
                 straight_through_alpha: bool = False):
        if arch is None:
            arch = modenet_arch()
        if arch.in_ch != 6 or arch.out_ch != 1:
            raise ValueError("mode network is fixed to 6 input channels and 1 output channel")
        if rng is None:
            rng = np.random.default_rng(0)
        self.arch = arch
        self.straight_through_alpha = straight_through_alpha
        self.coder = HyperCoder(arch, rng)

    def _check_inputs(self, x_prev: Tensor, x_t: Tensor):
        if x_prev.shape != x_t.shape:
            raise ShapeError(f"frame shapes differ: {tuple(x_prev.shape)} vs {tuple(x_t.shape)}")
        _, _, h, w = x_prev.shape
        s = self.arch.total_stride
        if h % s or w % s:
            raise ShapeError(f"frame dims {h}x{w} must be multiples of the stride product {s}")

    def _to_alpha(self, raw: Tensor) -> Tensor:
        return T.clip(T.add(raw, ALPHA_BIAS), 0.0, 1.0,
                      straight_through=self.straight_through_alpha)

    def forward_train(self, x_prev: Tensor, x_t: Tensor, rng,
                      stats: RateStats | None = None):
        """Noise-quantized pass: returns (alpha, rate bits Tensor)."""
        self._check_inputs(x_prev, x_t)
        raw, bits = self.coder.forward_train(T.concat([x_prev, x_t], axis=1), rng, stats)
        return self._to_alpha(raw), bits

    def encode(self, x_prev: Tensor, x_t: Tensor, table: CdfTable):
        """Deterministic pass with actual entropy coding.

        Returns a CoderResult whose out is alpha, reconstructed from the
        quantized latents, i.e. exactly what the decoder will compute.
        """
        self._check_inputs(x_prev, x_t)
        res = self.coder.encode(T.concat([x_prev, x_t], axis=1), table)
        res.out = self._to_alpha(res.out)
        return res

    def decode(self, z_chunk: bytes, y_chunk: bytes, h: int, w: int, table: CdfTable):
        """Decoder-side alpha from the bitstream chunks alone."""
        y_shape = self.coder.latent_shape(h, w)
        raw, y_q = self.coder.decode(z_chunk, y_chunk, y_shape, table)
        return self._to_alpha(raw), y_q

    def alpha_from_latents(self, y_q: np.ndarray) -> Tensor:
        return self._to_alpha(self.coder.reconstruct(y_q))
