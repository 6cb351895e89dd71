"""Shared transform-coder building blocks.

Every coder here is an autoencoder with a hyperprior: the analysis transform
g_a maps the signal to latents y, h_a summarizes y into hyper-latents z, and
h_s maps decoded z back to the per-element Laplace parameters (mu, b) of y.
z itself is coded with learned per-channel Laplace parameters. An optional
autoregressive context model (masked conv over already-decoded latents)
refines (mu, b) through a 1x1 entropy-parameters net.

Both the encoder and the decoder derive (mu, b) from data they share (z and
the decoded prefix of y), never from the original input, so coding is
deterministic end to end. With the context model enabled the parameters are
evaluated position by position by one shared routine on both sides, which
keeps the arithmetic order — and therefore every last bit — identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..entropy.cdf import CdfTable
from ..entropy.coder import RangeDecoder, RangeEncoder
from ..entropy.laplace import B_MIN, RateStats, rate_estimate
from ..entropy.quantize import quantize_infer, quantize_train
from ..nn import tensor as T
from ..nn.functional import conv2d
from ..nn.layers import (
    GDN,
    Conv2d,
    ConvTranspose2d,
    LeakyReLU,
    MaskedConv2d,
    Module,
    Parameter,
    inv_softplus,
)
from ..nn.tensor import Tensor

__all__ = ["CoderArch", "AnalysisTransform", "SynthesisTransform", "Hyper", "HyperCoder",
           "LatentCode", "CoderResult"]

LEAKY_SLOPE = 0.01


@dataclass
class LatentCode:
    """Coded latents of one transform coder plus exact per-element bit costs."""

    z_chunk: bytes
    y_chunk: bytes
    y_q: np.ndarray
    z_bits_map: np.ndarray
    y_bits_map: np.ndarray

    @property
    def bits(self) -> float:
        return float(self.z_bits_map.sum() + self.y_bits_map.sum())

    @property
    def chunks(self) -> tuple:
        return (self.z_chunk, self.y_chunk)


@dataclass
class CoderResult:
    """One deterministic coding pass: synthesis output plus its LatentCode."""

    out: "Tensor"
    code: LatentCode

    @property
    def bits(self) -> float:
        return self.code.bits

    @property
    def chunks(self) -> tuple:
        return self.code.chunks

    @property
    def y_q(self) -> np.ndarray:
        return self.code.y_q


@dataclass(frozen=True)
class CoderArch:
    in_ch: int
    out_ch: int
    f: int                      # internal feature count
    n: int                      # latent channels
    strides: tuple = (2, 2, 2, 2)
    kernel: int = 5
    hyper_f: int = 32
    hyper_strides: tuple = (2, 2)
    hyper_kernel: int = 5
    activation: str = "leaky"   # "leaky" or "gdn"
    context: bool = False
    ctx_kernel: int = 5
    zero_final: bool = False    # zero-init the last synthesis layer
    synth_extra_ch: int = 0     # extra channels concatenated into g_s input

    @property
    def main_stride(self) -> int:
        return int(np.prod(self.strides))

    @property
    def total_stride(self) -> int:
        return self.main_stride * int(np.prod(self.hyper_strides))


def _act(arch: CoderArch, channels: int, inverse: bool):
    if arch.activation == "gdn":
        return GDN(channels, inverse=inverse)
    return LeakyReLU(LEAKY_SLOPE)


class AnalysisTransform(Module):
    def __init__(self, arch: CoderArch, rng):
        self.layers = []
        cin = arch.in_ch
        for i, s in enumerate(arch.strides):
            last = i == len(arch.strides) - 1
            cout = arch.n if last else arch.f
            self.layers.append(Conv2d(cin, cout, arch.kernel, stride=s, rng=rng))
            if not last:
                self.layers.append(_act(arch, cout, inverse=False))
            cin = cout

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


class SynthesisTransform(Module):
    def __init__(self, arch: CoderArch, rng):
        self.layers = []
        cin = arch.n + arch.synth_extra_ch
        strides = tuple(reversed(arch.strides))
        for i, s in enumerate(strides):
            last = i == len(strides) - 1
            cout = arch.out_ch if last else arch.f
            self.layers.append(
                ConvTranspose2d(cin, cout, arch.kernel, stride=s, rng=rng,
                                zero_init=arch.zero_final and last)
            )
            if not last:
                self.layers.append(_act(arch, cout, inverse=True))
            cin = cout

    def __call__(self, y: Tensor) -> Tensor:
        for layer in self.layers:
            y = layer(y)
        return y


class Hyper(Module):
    """Hyper-encoder/decoder plus entropy models for one latent tensor."""

    def __init__(self, arch: CoderArch, rng):
        self.arch = arch
        n, hf, k = arch.n, arch.hyper_f, arch.hyper_kernel
        self.h_a = [Conv2d(n, hf, 3, stride=1, rng=rng), LeakyReLU(LEAKY_SLOPE)]
        for i, s in enumerate(arch.hyper_strides):
            self.h_a.append(Conv2d(hf, hf, k, stride=s, rng=rng))
            if i < len(arch.hyper_strides) - 1:
                self.h_a.append(LeakyReLU(LEAKY_SLOPE))
        self.h_s = []
        for s in reversed(arch.hyper_strides):
            self.h_s.append(ConvTranspose2d(hf, hf, k, stride=s, rng=rng))
            self.h_s.append(LeakyReLU(LEAKY_SLOPE))
        self.h_s.append(Conv2d(hf, 2 * n, 3, stride=1, rng=rng))
        # learned per-channel prior over hyper-latents
        self.z_mu = Parameter(np.zeros(hf, dtype=np.float32))
        self.z_braw = Parameter(np.full(hf, inv_softplus(1.0), dtype=np.float32))
        if arch.context:
            self.ctx = MaskedConv2d(n, 2 * n, arch.ctx_kernel, inclusive=False, rng=rng)
            self.ep1 = Conv2d(4 * n, 2 * n, 1, stride=1, padding=0, rng=rng)
            self.ep2 = Conv2d(2 * n, 2 * n, 1, stride=1, padding=0, rng=rng)
            self._bias_scale_head(self.ep2)
        else:
            self.ctx = None
            self._bias_scale_head(self.h_s[-1])

    def _bias_scale_head(self, layer):
        # start the predicted Laplace scale near 1 so early rates are sane
        layer.bias.data[self.arch.n :] = inv_softplus(1.0 - B_MIN)

    def _run(self, layers, x):
        for layer in layers:
            x = layer(x)
        return x

    def _z_prior(self, z_shape):
        hf = self.arch.hyper_f
        mu = T.reshape(self.z_mu, (1, hf, 1, 1))
        b = T.add(T.softplus(T.reshape(self.z_braw, (1, hf, 1, 1))), B_MIN)
        ones = Tensor(np.ones(z_shape, dtype=np.float32))
        return T.mul(mu, ones), T.mul(b, ones)

    def _split_params(self, feat: Tensor):
        n = self.arch.n
        mu = T.narrow(feat, 1, 0, n)
        b = T.add(T.softplus(T.narrow(feat, 1, n, n)), B_MIN)
        return mu, b

    # -- training path (differentiable, noise-quantized) ----------------------

    def rates_train(self, y: Tensor, rng, stats: RateStats | None = None):
        """Noise-quantize y and z; return (y_tilde, total rate bits Tensor)."""
        z = self._run(self.h_a, y)
        z_tilde = quantize_train(z, rng)
        mu_z, b_z = self._z_prior(z.shape)
        bits_z = rate_estimate(z_tilde, mu_z, b_z, stats)
        y_tilde = quantize_train(y, rng)
        feat = self._run(self.h_s, z_tilde)
        if self.ctx is not None:
            cfeat = self.ctx(y_tilde)
            h = T.leaky_relu(self.ep1(T.concat([feat, cfeat], axis=1)), LEAKY_SLOPE)
            mu, b = self._split_params(self.ep2(h))
        else:
            mu, b = self._split_params(feat)
        bits_y = rate_estimate(y_tilde, mu, b, stats)
        return y_tilde, T.add(bits_y, bits_z)

    # -- deterministic coding path --------------------------------------------

    def _z_param_arrays(self, z_shape):
        hf = self.arch.hyper_f
        mu = np.broadcast_to(self.z_mu.data.reshape(1, hf, 1, 1), z_shape)
        b_ch = B_MIN + np.logaddexp(0.0, self.z_braw.data.astype(np.float64))
        b = np.broadcast_to(b_ch.astype(np.float32).reshape(1, hf, 1, 1), z_shape)
        return np.ascontiguousarray(mu), np.ascontiguousarray(b)

    def _code_tensor(self, q: np.ndarray, mu: np.ndarray, b: np.ndarray, table: CdfTable):
        k, rows = table.element_rows(mu, b)
        t = q.reshape(-1) - k
        enc = RangeEncoder()
        bits = np.empty(len(rows), dtype=np.float64)
        for i, (row, ti) in enumerate(zip(rows, t.tolist())):
            enc.encode_value(row, ti)
            bits[i] = row.cost_bits(ti)
        return enc.finish(), bits.reshape(q.shape)

    def _decode_tensor(self, chunk: bytes, mu: np.ndarray, b: np.ndarray, table: CdfTable, shape):
        k, rows = table.element_rows(mu, b)
        dec = RangeDecoder(chunk)
        vals = np.empty(len(rows), dtype=np.int64)
        for i, row in enumerate(rows):
            vals[i] = dec.decode_value(row)
        return (vals + k).reshape(shape)

    def encode_latents(self, y: Tensor, table: CdfTable) -> "LatentCode":
        """Quantize and code (z, y) into chunks with per-element bit costs."""
        if y.shape[0] != 1:
            raise T.ShapeError(f"coding operates on single frames, got batch {y.shape[0]}")
        with T.no_grad():
            z = self._run(self.h_a, y)
            z_q = quantize_infer(z)
            mu_z, b_z = self._z_param_arrays(z.shape)
            z_chunk, z_map = self._code_tensor(z_q, mu_z, b_z, table)
            y_q = quantize_infer(y)
            feat = self._run(self.h_s, Tensor(z_q.astype(np.float32)))
            if self.ctx is not None:
                y_chunk, y_map = self._ctx_code(y_q, feat.data, table)
            else:
                mu, b = self._split_params(feat)
                y_chunk, y_map = self._code_tensor(y_q, mu.data, b.data, table)
        return LatentCode(z_chunk=z_chunk, y_chunk=y_chunk, y_q=y_q,
                          z_bits_map=z_map, y_bits_map=y_map)

    def decode_latents(self, z_chunk: bytes, y_chunk: bytes, y_shape, table: CdfTable):
        """Recover quantized latents from chunks; needs only model parameters."""
        hs = int(np.prod(self.arch.hyper_strides))
        z_shape = (y_shape[0], self.arch.hyper_f, y_shape[2] // hs, y_shape[3] // hs)
        with T.no_grad():
            mu_z, b_z = self._z_param_arrays(z_shape)
            z_q = self._decode_tensor(z_chunk, mu_z, b_z, table, z_shape)
            feat = self._run(self.h_s, Tensor(z_q.astype(np.float32)))
            if self.ctx is not None:
                y_q = self._ctx_decode(y_chunk, feat.data, y_shape, table)
            else:
                mu, b = self._split_params(feat)
                y_q = self._decode_tensor(y_chunk, mu.data, b.data, table, y_shape)
        return y_q

    # -- sequential context-model coding ---------------------------------------
    # One routine computes (mu, b) at a single raster position from the decoded
    # prefix; encoder and decoder both call it, so their arithmetic matches
    # bit for bit. Masked-out taps have exactly-zero weights, which lets the
    # encoder keep the full latent plane in the buffer.

    def _ctx_mats(self):
        n, k = self.arch.n, self.arch.ctx_kernel
        wm = (self.ctx.weight.data * self.ctx.mask).reshape(2 * n, n * k * k)
        return (
            wm,
            self.ctx.bias.data,
            self.ep1.weight.data.reshape(self.ep1.cout, 4 * n),
            self.ep1.bias.data,
            self.ep2.weight.data.reshape(2 * n, self.ep2.cin),
            self.ep2.bias.data,
        )

    def _ctx_params_at(self, padded, feat_vec, i, j, mats):
        wm, cb, w1, b1, w2, b2 = mats
        k = self.arch.ctx_kernel
        window = padded[:, i : i + k, j : j + k].reshape(-1)
        cvec = wm @ window + cb
        h = np.concatenate([feat_vec, cvec])
        h1 = w1 @ h + b1
        h1 = np.where(h1 >= 0, h1, np.float32(LEAKY_SLOPE) * h1)
        out = w2 @ h1 + b2
        n = self.arch.n
        mu = out[:n]
        b = (B_MIN + np.logaddexp(0.0, out[n:].astype(np.float64))).astype(np.float32)
        return mu, b

    def _ctx_loop(self, feat: np.ndarray, y_shape, table: CdfTable, visit):
        """Walk latent positions in raster order.

        visit(i, j, rows, kk) must return the int64 symbol vector (decoded or
        known) for that position; it is written back into the causal buffer.
        Returns (latents as float32, exact table bits).
        """
        n, k = self.arch.n, self.arch.ctx_kernel
        pad = k // 2
        _, _, h, w = y_shape
        padded = np.zeros((n, h + 2 * pad, w + 2 * pad), dtype=np.float32)
        mats = self._ctx_mats()
        bits = np.zeros(y_shape, dtype=np.float64)
        for i in range(h):
            for j in range(w):
                mu, b = self._ctx_params_at(padded, feat[0, :, i, j], i, j, mats)
                kk, rows = table.element_rows(mu, b)
                vals = visit(i, j, rows, kk)
                padded[:, i + pad, j + pad] = vals.astype(np.float32)
                for c, (row, v, ki) in enumerate(zip(rows, vals.tolist(), kk.tolist())):
                    bits[0, c, i, j] = row.cost_bits(int(v) - int(ki))
        return bits

    def _ctx_code(self, y_q: np.ndarray, feat: np.ndarray, table: CdfTable):
        enc = RangeEncoder()

        def visit(i, j, rows, kk):
            vals = y_q[0, :, i, j]
            for row, ti in zip(rows, (vals - kk).tolist()):
                enc.encode_value(row, int(ti))
            return vals

        bits = self._ctx_loop(feat, y_q.shape, table, visit)
        return enc.finish(), bits

    def _ctx_decode(self, chunk: bytes, feat: np.ndarray, y_shape, table: CdfTable):
        dec = RangeDecoder(chunk)
        out = np.empty(y_shape, dtype=np.int64)

        def visit(i, j, rows, kk):
            vals = np.empty(len(rows), dtype=np.int64)
            for c, row in enumerate(rows):
                vals[c] = dec.decode_value(row) + kk[c]
            out[0, :, i, j] = vals
            return vals

        self._ctx_loop(feat, y_shape, table, visit)
        return out


class HyperCoder(Module):
    """Complete transform coder: g_a / g_s around a hyperprior entropy model."""

    def __init__(self, arch: CoderArch, rng):
        self.arch = arch
        self.g_a = AnalysisTransform(arch, rng)
        self.g_s = SynthesisTransform(arch, rng)
        self.hyper = Hyper(arch, rng)

    def _synth_in(self, y: Tensor, extra: Tensor | None) -> Tensor:
        if self.arch.synth_extra_ch:
            if extra is None:
                raise ValueError("this coder's synthesis expects extra feature input")
            return T.concat([y, extra], axis=1)
        return y

    def forward_train(self, x: Tensor, rng, stats: RateStats | None = None,
                      synth_extra: Tensor | None = None):
        """Noise-quantized forward pass; returns (synthesis output, rate bits)."""
        y = self.g_a(x)
        y_tilde, bits = self.hyper.rates_train(y, rng, stats)
        return self.g_s(self._synth_in(y_tilde, synth_extra)), bits

    def reconstruct(self, y_q: np.ndarray, synth_extra: Tensor | None = None) -> Tensor:
        """Decode-side synthesis from quantized latents."""
        with T.no_grad():
            yt = Tensor(y_q.astype(np.float32))
            return self.g_s(self._synth_in(yt, synth_extra))

    def encode(self, x: Tensor, table: CdfTable, synth_extra: Tensor | None = None) -> CoderResult:
        """Deterministic inference: rounds latents, range-codes them, and
        reconstructs from exactly what a decoder will see."""
        with T.no_grad():
            y = self.g_a(x)
            code = self.hyper.encode_latents(y, table)
        out = self.reconstruct(code.y_q, synth_extra)
        return CoderResult(out=out, code=code)

    def decode(self, z_chunk: bytes, y_chunk: bytes, y_shape, table: CdfTable,
               synth_extra: Tensor | None = None):
        y_q = self.hyper.decode_latents(z_chunk, y_chunk, y_shape, table)
        return self.reconstruct(y_q, synth_extra), y_q

    def latent_shape(self, h: int, w: int):
        s = self.arch.main_stride
        return (1, self.arch.n, h // s, w // s)
