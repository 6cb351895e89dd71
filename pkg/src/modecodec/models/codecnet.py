"""Content coder in three configurations.

image:        codes the masked target frame on its own.
difference:   codes the masked residual (target - prediction); the decoder
              adds the prediction back. Residuals live in [-1, 1] and are
              mapped to [0, 1] before the transforms for GDN stability.
conditional:  the analysis sees (masked prediction, masked target) stacked;
              the synthesis sees the decoded latents concatenated with
              features from a small strided transform of the prediction,
              so the decoder can exploit the prediction without ever touching
              the target.
"""

from __future__ import annotations

import numpy as np

from ..entropy.cdf import CdfTable
from ..entropy.laplace import RateStats
from ..nn import tensor as T
from ..nn.functional import conv_out_dim
from ..nn.layers import Conv2d, LeakyReLU, Module
from ..nn.tensor import ShapeError, Tensor
from .blocks import LEAKY_SLOPE, CoderArch, HyperCoder

__all__ = ["CodecNet", "codecnet_arch", "CODEC_MODES"]

CODEC_MODES = ("image", "difference", "conditional")


def codecnet_arch(mode: str = "conditional", f: int = 72, n: int = 104,
                  hyper_f: int = 48, strides: tuple = (2, 2, 2, 2),
                  context: bool = True, pred_f: int = 40) -> CoderArch:
    """Default ladder sized near 10x the mode network's parameter count."""
    if mode not in CODEC_MODES:
        raise ValueError(f"codec mode must be one of {CODEC_MODES}, got {mode!r}")
    conditional = mode == "conditional"
    return CoderArch(
        in_ch=6 if conditional else 3,
        out_ch=3,
        f=f,
        n=n,
        strides=strides,
        hyper_f=hyper_f,
        activation="gdn",
        context=context,
        synth_extra_ch=pred_f if conditional else 0,
    )


class PredictionAnalysis(Module):
    """Strided feature extractor over the masked prediction; its stride
    product matches the main analysis so features land at latent resolution."""

    def __init__(self, width: int, out_ch: int, total_stride: int, rng):
        strides = _stride_split(total_stride)
        self.layers = []
        cin = 3
        for i, s in enumerate(strides):
            last = i == len(strides) - 1
            cout = out_ch if last else width
            self.layers.append(Conv2d(cin, cout, 5, stride=s, rng=rng))
            if not last:
                self.layers.append(LeakyReLU(LEAKY_SLOPE))
            cin = cout

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def _stride_split(total: int) -> tuple:
    """Three-layer stride ladder multiplying to the main stride product."""
    assert total % 4 == 0 and total >= 4
    first = total // 4
    return (first, 2, 2)


class CodecNet(Module):
    def __init__(self, mode: str = "conditional", arch: CoderArch | None = None,
                 rng=None, pred_width: int = 40):
        if mode not in CODEC_MODES:
            raise ValueError(f"codec mode must be one of {CODEC_MODES}, got {mode!r}")
        if arch is None:
            arch = codecnet_arch(mode)
        expected_in = 6 if mode == "conditional" else 3
        if arch.in_ch != expected_in:
            raise ValueError(f"{mode} coder needs {expected_in} input channels, arch has {arch.in_ch}")
        if mode != "conditional" and arch.synth_extra_ch:
            raise ValueError(f"{mode} coder takes no prediction path")
        if mode == "conditional" and not arch.synth_extra_ch:
            raise ValueError("conditional coder needs synth_extra_ch for prediction features")
        if rng is None:
            rng = np.random.default_rng(0)
        self.mode = mode
        self.arch = arch
        self.coder = HyperCoder(arch, rng)
        if mode == "conditional":
            self.pred_analysis = PredictionAnalysis(
                pred_width, arch.synth_extra_ch, arch.main_stride, rng)
        else:
            self.pred_analysis = None

    # -- input plumbing per mode ------------------------------------------------

    def _check(self, masked_pred: Tensor, masked_target: Tensor | None):
        if masked_target is not None and masked_pred.shape != masked_target.shape:
            raise ShapeError(
                f"prediction {tuple(masked_pred.shape)} vs target {tuple(masked_target.shape)}"
            )
        _, c, h, w = masked_pred.shape
        if c != 3:
            raise ShapeError(f"coder expects 3-channel frames, got {c}")
        s = self.arch.total_stride
        if h % s or w % s:
            raise ShapeError(f"frame dims {h}x{w} must be multiples of the stride product {s}")

    def _analysis_input(self, masked_pred: Tensor, masked_target: Tensor) -> Tensor:
        if self.mode == "image":
            return masked_target
        if self.mode == "difference":
            res = T.sub(masked_target, masked_pred)
            return T.add(T.mul(res, 0.5), 0.5)
        return T.concat([masked_pred, masked_target], axis=1)

    def _synth_extra(self, masked_pred: Tensor) -> Tensor | None:
        if self.mode == "conditional":
            return self.pred_analysis(masked_pred)
        return None

    def _output(self, raw: Tensor, masked_pred: Tensor) -> Tensor:
        if self.mode == "difference":
            return T.add(T.mul(T.sub(raw, 0.5), 2.0), masked_pred)
        return raw

    # -- phases ------------------------------------------------------------------

    def forward_train(self, masked_pred: Tensor, masked_target: Tensor, rng,
                      stats: RateStats | None = None):
        """Noise-quantized pass: returns (reconstruction of masked target, rate bits)."""
        self._check(masked_pred, masked_target)
        x = self._analysis_input(masked_pred, masked_target)
        raw, bits = self.coder.forward_train(x, rng, stats,
                                             synth_extra=self._synth_extra(masked_pred))
        return self._output(raw, masked_pred), bits

    def encode(self, masked_pred: Tensor, masked_target: Tensor, table: CdfTable):
        """Deterministic coding pass; reconstruction comes from quantized
        latents plus decoder-available inputs only. Returns a CoderResult."""
        self._check(masked_pred, masked_target)
        x = self._analysis_input(masked_pred, masked_target)
        res = self.coder.encode(x, table, synth_extra=self._synth_extra(masked_pred))
        res.out = self._output(res.out, masked_pred)
        return res

    def decode(self, z_chunk: bytes, y_chunk: bytes, masked_pred: Tensor, table: CdfTable):
        """Decoder-side reconstruction from chunks + the masked prediction."""
        self._check(masked_pred, None)
        _, _, h, w = masked_pred.shape
        y_shape = self.coder.latent_shape(h, w)
        raw, y_q = self.coder.decode(z_chunk, y_chunk, y_shape, table,
                                     synth_extra=self._synth_extra(masked_pred))
        return self._output(raw, masked_pred), y_q

    def reconstruct(self, y_q: np.ndarray, masked_pred: Tensor) -> Tensor:
        """Same synthesis the decoder runs, given already-decoded latents."""
        raw = self.coder.reconstruct(y_q, synth_extra=self._synth_extra(masked_pred))
        return self._output(raw, masked_pred)
