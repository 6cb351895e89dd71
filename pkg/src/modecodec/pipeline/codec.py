"""Frame-pair encode/decode to the .mdn container.

Frames are reflect-padded up to the stride-product multiple before running
the networks; the header stores the original dims so decode can crop back.
The decoder input is (bitstream, previous frame, model) — the coded frame
itself never reaches any decode path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..entropy.bitstream import (
    CODEC_CONFIG_CODES,
    FLAG_CONTEXT,
    FLAG_MODENET,
    BitstreamError,
    BitstreamHeader,
    HEADER_BYTES,
    pack_bitstream,
    unpack_bitstream,
)
from ..entropy.cdf import CdfTable, get_table
from ..nn.tensor import Tensor
from .system import ModelMismatchError, PFrameSystem, SystemOutput

__all__ = ["encode_pair", "decode_bytes", "pad_frame", "EncodedFrame"]


def pad_frame(arr: np.ndarray, stride: int) -> np.ndarray:
    """Reflect-pad (3, H, W) on bottom/right to multiples of stride."""
    _, h, w = arr.shape
    ph = (stride - h % stride) % stride
    pw = (stride - w % stride) % stride
    if ph == 0 and pw == 0:
        return arr
    return np.pad(arr, ((0, 0), (0, ph), (0, pw)), mode="reflect")


@dataclass
class EncodedFrame:
    data: bytes                 # complete .mdn stream
    output: SystemOutput        # padded-domain system output
    xhat: np.ndarray            # reconstruction cropped to original dims
    width: int
    height: int

    @property
    def payload_bytes(self) -> int:
        return len(self.data) - HEADER_BYTES - 4 * 4

    @property
    def bpp(self) -> float:
        return self.payload_bytes * 8 / (self.width * self.height)


def _flags(system: PFrameSystem) -> int:
    flags = 0
    if system.config.use_modenet:
        flags |= FLAG_MODENET
    if system.config.codec_context:
        flags |= FLAG_CONTEXT
    return flags


def encode_pair(system: PFrameSystem, prev: np.ndarray, cur: np.ndarray,
                table: CdfTable | None = None) -> EncodedFrame:
    """prev/cur: (3, H, W) float arrays in [0, 1]."""
    if prev.shape != cur.shape:
        raise BitstreamError(f"frame shapes differ: {prev.shape} vs {cur.shape}")
    _, h, w = prev.shape
    if h > 0xFFFF or w > 0xFFFF:
        raise BitstreamError(f"frame dims {w}x{h} exceed the 16-bit header fields")
    stride = system.config.stride_product
    if table is None:
        table = get_table()
    prev_p = Tensor(pad_frame(prev.astype(np.float32), stride)[None])
    cur_p = Tensor(pad_frame(cur.astype(np.float32), stride)[None])
    out = system.infer(prev_p, cur_p, table)
    chunks = [b"", b"", b"", b""]
    if out.mode_code is not None:
        chunks[0], chunks[1] = out.mode_code.chunks
    if out.codec_code is not None:
        chunks[2], chunks[3] = out.codec_code.chunks
    header = BitstreamHeader(
        codec_config=CODEC_CONFIG_CODES[system.config.codec_mode],
        flags=_flags(system),
        width=w,
        height=h,
        model_hash=system.model_hash(),
    )
    data = pack_bitstream(header, chunks)
    xhat = out.xhat.data[0, :, :h, :w].copy()
    return EncodedFrame(data=data, output=out, xhat=xhat, width=w, height=h)


@dataclass
class DecodedFrame:
    xhat: np.ndarray
    alpha: np.ndarray
    width: int
    height: int
    payload_bytes: int

    @property
    def bpp(self) -> float:
        return self.payload_bytes * 8 / (self.width * self.height)


def decode_bytes(system: PFrameSystem, data: bytes, prev: np.ndarray,
                 table: CdfTable | None = None) -> DecodedFrame:
    """Reconstruct the coded frame from the stream and the reference frame."""
    header, chunks = unpack_bitstream(data)
    if header.model_hash != system.model_hash():
        raise ModelMismatchError(
            f"bitstream was produced by model {header.model_hash.hex()}, "
            f"loaded model is {system.model_hash().hex()}")
    if header.codec_config != CODEC_CONFIG_CODES[system.config.codec_mode]:
        raise ModelMismatchError("bitstream codec configuration differs from the model's")
    if bool(header.flags & FLAG_MODENET) != system.config.use_modenet:
        raise ModelMismatchError("bitstream mode-network flag differs from the model's")
    _, h, w = prev.shape
    if (w, h) != (header.width, header.height):
        raise BitstreamError(
            f"reference frame is {w}x{h} but stream says {header.width}x{header.height}")
    if table is None:
        table = get_table()
    stride = system.config.stride_product
    prev_p = Tensor(pad_frame(prev.astype(np.float32), stride)[None])
    out = system.decode_frame(chunks, prev_p, table)
    xhat = out.xhat.data[0, :, :h, :w].copy()
    alpha = out.alpha.data[0, 0, :h, :w].copy()
    return DecodedFrame(xhat=xhat, alpha=alpha, width=w, height=h,
                        payload_bytes=sum(len(c) for c in chunks))
