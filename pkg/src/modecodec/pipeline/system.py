"""Complete P-frame system: mode selection + content coding + blending.

The prediction is the previous frame itself (no motion compensation). The
mode network produces alpha; the content coder sees only the alpha-masked
prediction and target; the output blends copied and transmitted content:

    x_hat = (1 - alpha) * prediction + coded(alpha * prediction, alpha * target)

Forcing alpha to 0 short-circuits the content coder entirely (pure copy);
forcing it to 1, or disabling the mode network, yields the content-coder-only
system.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..entropy.cdf import CdfTable, get_table
from ..entropy.laplace import RateStats
from ..metrics import MsSsimConfig, rd_loss
from ..nn import tensor as T
from ..nn import checkpoint
from ..nn.layers import Module
from ..nn.tensor import ShapeError, Tensor
from ..models.blocks import CoderResult, LatentCode
from ..models.codecnet import CODEC_MODES, CodecNet, codecnet_arch
from ..models.modenet import ModeNet, modenet_arch

__all__ = ["SystemConfig", "PFrameSystem", "SystemOutput", "build_system",
           "save_system", "load_system", "ModelMismatchError"]


class ModelMismatchError(ValueError):
    """Checkpoint / bitstream / configuration disagreement."""


@dataclass(frozen=True)
class SystemConfig:
    codec_mode: str = "conditional"
    use_modenet: bool = True
    lam: float = 0.01
    seed: int = 0
    # mode-selection network ladder
    mode_f: int = 32
    mode_n: int = 32
    mode_hyper_f: int = 16
    mode_strides: tuple = (2, 2, 2, 2)
    mode_context: bool = False
    straight_through_alpha: bool = False
    # content coder ladder
    codec_f: int = 72
    codec_n: int = 104
    codec_hyper_f: int = 48
    codec_strides: tuple = (2, 2, 2, 2)
    codec_context: bool = True
    pred_f: int = 40
    pred_width: int = 40
    # distortion metric scale count (5 needs >= 176px, 3 fits 64px crops)
    msssim_scales: int = 3

    def __post_init__(self):
        if self.codec_mode not in CODEC_MODES:
            raise ValueError(f"codec_mode must be one of {CODEC_MODES}")
        object.__setattr__(self, "mode_strides", tuple(self.mode_strides))
        object.__setattr__(self, "codec_strides", tuple(self.codec_strides))

    @property
    def stride_product(self) -> int:
        mode = int(np.prod(self.mode_strides)) * 4 if self.use_modenet else 1
        codec = int(np.prod(self.codec_strides)) * 4
        return math.lcm(mode, codec)

    def msssim_config(self) -> MsSsimConfig:
        if self.msssim_scales == 5:
            return MsSsimConfig()
        return MsSsimConfig.small_image(self.msssim_scales)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SystemConfig":
        raw = json.loads(text)
        raw["mode_strides"] = tuple(raw["mode_strides"])
        raw["codec_strides"] = tuple(raw["codec_strides"])
        return SystemConfig(**raw)


@dataclass
class SystemOutput:
    """One coded frame: reconstruction, partition, and rate accounting."""

    xhat: Tensor
    alpha: Tensor
    xhat_c: Tensor
    rm_bits: float
    rc_bits: float
    mode_code: LatentCode | None = None
    codec_code: LatentCode | None = None

    @property
    def total_bits(self) -> float:
        return self.rm_bits + self.rc_bits

    def bpp(self, pixels: int) -> float:
        return self.total_bits / pixels


class PFrameSystem(Module):
    def __init__(self, config: SystemConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        if config.use_modenet:
            self.modenet = ModeNet(
                arch=modenet_arch(f=config.mode_f, n=config.mode_n,
                                  hyper_f=config.mode_hyper_f,
                                  strides=config.mode_strides,
                                  context=config.mode_context),
                rng=rng,
                straight_through_alpha=config.straight_through_alpha,
            )
        else:
            self.modenet = None
        self.codecnet = CodecNet(
            mode=config.codec_mode,
            arch=codecnet_arch(config.codec_mode, f=config.codec_f, n=config.codec_n,
                               hyper_f=config.codec_hyper_f, strides=config.codec_strides,
                               context=config.codec_context, pred_f=config.pred_f),
            rng=rng,
            pred_width=config.pred_width,
        )

    # -- helpers -----------------------------------------------------------------

    def _check_pair(self, x_prev: Tensor, x_t: Tensor):
        if x_prev.shape != x_t.shape:
            raise ShapeError(f"frame shapes differ: {tuple(x_prev.shape)} vs {tuple(x_t.shape)}")
        _, c, h, w = x_prev.shape
        if c != 3:
            raise ShapeError(f"frames must be 3-channel, got {c}")
        s = self.config.stride_product
        if h % s or w % s:
            raise ShapeError(f"frame dims {h}x{w} must be padded to multiples of {s}")

    @staticmethod
    def _const_alpha(value: float, x: Tensor) -> Tensor:
        n, _, h, w = x.shape
        return Tensor(np.full((n, 1, h, w), value, dtype=x.data.dtype))

    @staticmethod
    def _blend(alpha: Tensor, x_prev: Tensor, xhat_c: Tensor) -> Tensor:
        one = Tensor(np.ones((), dtype=x_prev.data.dtype))
        return T.add(T.mul(T.sub(one, alpha), x_prev), xhat_c)

    def model_hash(self) -> bytes:
        arrays = {name: p.data for name, p in self.named_parameters()}
        arrays["__config__"] = np.frombuffer(self.config.to_json().encode(), dtype=np.uint8).copy()
        return checkpoint.digest(arrays)

    # -- training path -------------------------------------------------------------

    def forward_train(self, x_prev: Tensor, x_t: Tensor, rng,
                      stats: RateStats | None = None, forced_alpha: float | None = None):
        """Noise-quantized forward pass.

        Returns (SystemOutput with Tensor rates, loss Tensor). forced_alpha
        replaces the learned map with a constant; 0.0 skips the content coder.
        """
        self._check_pair(x_prev, x_t)
        pred = x_prev
        zero_bits = Tensor(np.zeros((), dtype=x_t.data.dtype))
        if forced_alpha is not None:
            alpha = self._const_alpha(forced_alpha, x_t)
            rm = zero_bits
        elif self.modenet is not None:
            alpha, rm = self.modenet.forward_train(pred, x_t, rng, stats)
        else:
            alpha = self._const_alpha(1.0, x_t)
            rm = zero_bits
        if forced_alpha == 0.0:
            xhat_c = Tensor(np.zeros_like(x_t.data))
            rc = zero_bits
            xhat = self._blend(alpha, pred, xhat_c)
        else:
            masked_pred = T.mul(alpha, pred)
            masked_target = T.mul(alpha, x_t)
            xhat_c, rc = self.codecnet.forward_train(masked_pred, masked_target, rng, stats)
            xhat = self._blend(alpha, pred, xhat_c)
        n, _, h, w = x_t.shape
        loss = rd_loss(xhat, x_t, rm, rc, self.config.lam,
                       cfg=self.config.msssim_config(), pixels=n * h * w)
        out = SystemOutput(xhat=xhat, alpha=alpha, xhat_c=xhat_c,
                           rm_bits=rm, rc_bits=rc)
        return out, loss

    # -- deterministic inference / coding path ---------------------------------------

    def infer(self, x_prev: Tensor, x_t: Tensor, table: CdfTable | None = None,
              forced_alpha: float | None = None) -> SystemOutput:
        """Deterministic pass with actual entropy coding; rates are exact
        table bits and the reconstruction matches what decode() produces."""
        self._check_pair(x_prev, x_t)
        if table is None:
            table = get_table()
        pred = x_prev
        mode_code = None
        if forced_alpha is not None:
            alpha = self._const_alpha(forced_alpha, x_t)
            rm = 0.0
        elif self.modenet is not None:
            res = self.modenet.encode(pred, x_t, table)
            alpha, rm, mode_code = res.out, res.bits, res.code
        else:
            alpha = self._const_alpha(1.0, x_t)
            rm = 0.0
        if forced_alpha == 0.0:
            xhat_c = Tensor(np.zeros_like(x_t.data))
            rc = 0.0
            codec_code = None
        else:
            with T.no_grad():
                masked_pred = T.mul(alpha, pred)
                masked_target = T.mul(alpha, x_t)
            cres = self.codecnet.encode(masked_pred, masked_target, table)
            xhat_c, rc, codec_code = cres.out, cres.bits, cres.code
        with T.no_grad():
            xhat = self._blend(alpha, pred, xhat_c)
        return SystemOutput(xhat=xhat, alpha=alpha, xhat_c=xhat_c,
                            rm_bits=rm, rc_bits=rc,
                            mode_code=mode_code, codec_code=codec_code)

    def decode_frame(self, chunks: list[bytes], x_prev: Tensor,
                     table: CdfTable | None = None) -> SystemOutput:
        """Reconstruct from bitstream chunks and the reference frame only.

        chunks order: mode hyper, mode main, codec hyper, codec main.
        """
        if table is None:
            table = get_table()
        pred = x_prev
        _, _, h, w = x_prev.shape
        if self.modenet is not None:
            alpha, _ = self.modenet.decode(chunks[0], chunks[1], h, w, table)
        else:
            alpha = self._const_alpha(1.0, x_prev)
        with T.no_grad():
            masked_pred = T.mul(alpha, pred)
        if len(chunks[2]) == 0 and len(chunks[3]) == 0:
            xhat_c = Tensor(np.zeros_like(x_prev.data))
        else:
            xhat_c, _ = self.codecnet.decode(chunks[2], chunks[3], masked_pred, table)
        with T.no_grad():
            xhat = self._blend(alpha, pred, xhat_c)
        rc_bits = (len(chunks[2]) + len(chunks[3])) * 8
        rm_bits = (len(chunks[0]) + len(chunks[1])) * 8
        return SystemOutput(xhat=xhat, alpha=alpha, xhat_c=xhat_c,
                            rm_bits=rm_bits, rc_bits=rc_bits)

    # -- phase/freeze control ----------------------------------------------------------

    def set_stage(self, stage: str):
        """Freeze one network per the alternating schedule.

        'codec' and 'warmup' train the content coder; 'mode' trains the mode
        network; 'all' unfreezes everything.
        """
        if stage in ("warmup", "codec"):
            if self.modenet is not None:
                self.modenet.set_trainable(False)
            self.codecnet.set_trainable(True)
        elif stage == "mode":
            if self.modenet is None:
                raise ValueError("cannot run a mode-network epoch: system has none")
            self.modenet.set_trainable(True)
            self.codecnet.set_trainable(False)
        elif stage == "all":
            if self.modenet is not None:
                self.modenet.set_trainable(True)
            self.codecnet.set_trainable(True)
        else:
            raise ValueError(f"unknown stage {stage!r}")


def build_system(config: SystemConfig) -> PFrameSystem:
    return PFrameSystem(config)


def save_system(path, system: PFrameSystem):
    arrays = {name: p.data for name, p in system.named_parameters()}
    arrays["__config__"] = np.frombuffer(system.config.to_json().encode(), dtype=np.uint8).copy()
    checkpoint.save_arrays(path, arrays)


def load_system(path) -> PFrameSystem:
    arrays = checkpoint.load_arrays(path)
    if "__config__" not in arrays:
        raise ModelMismatchError(f"{path}: checkpoint has no embedded configuration")
    config = SystemConfig.from_json(bytes(arrays.pop("__config__")).decode())
    system = PFrameSystem(config)
    params = dict(system.named_parameters())
    if set(params) != set(arrays):
        missing = set(params) ^ set(arrays)
        raise ModelMismatchError(f"{path}: parameter set mismatch: {sorted(missing)[:4]}...")
    for name, p in params.items():
        if p.data.shape != arrays[name].shape:
            raise ModelMismatchError(
                f"{path}: shape mismatch for {name}: {p.data.shape} vs {arrays[name].shape}")
        p.data = arrays[name].astype(p.data.dtype)
    return system
