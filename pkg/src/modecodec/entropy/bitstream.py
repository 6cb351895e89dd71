"""The .mdn bitstream container.

Layout (all integers big-endian):
    magic "MDN1"
    version        u8
    codec-config   u8   (0=image, 1=difference, 2=conditional)
    flags          u8   (bit0: mode network present, bit1: context model enabled)
    width          u16  original frame width before padding
    height         u16  original frame height before padding
    model-hash     8 bytes
    4 chunks, each u32 length + payload, in order:
        mode hyper, mode main, codec hyper, codec main
Absent components have zero-length chunks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

__all__ = ["BitstreamHeader", "BitstreamError", "pack_bitstream", "unpack_bitstream",
           "HEADER_BYTES", "FLAG_MODENET", "FLAG_CONTEXT", "CODEC_CONFIG_CODES"]

MAGIC = b"MDN1"
VERSION = 1
HEADER_BYTES = 4 + 1 + 1 + 1 + 2 + 2 + 8
N_CHUNKS = 4

FLAG_MODENET = 0x01
FLAG_CONTEXT = 0x02

CODEC_CONFIG_CODES = {"image": 0, "difference": 1, "conditional": 2}
CODEC_CONFIG_NAMES = {v: k for k, v in CODEC_CONFIG_CODES.items()}


class BitstreamError(ValueError):
    """Malformed, truncated or mismatched bitstream."""


@dataclass
class BitstreamHeader:
    codec_config: int
    flags: int
    width: int
    height: int
    model_hash: bytes

    @property
    def codec_mode(self) -> str:
        return CODEC_CONFIG_NAMES[self.codec_config]

    @property
    def has_modenet(self) -> bool:
        return bool(self.flags & FLAG_MODENET)


def pack_bitstream(header: BitstreamHeader, chunks: list[bytes]) -> bytes:
    if len(chunks) != N_CHUNKS:
        raise BitstreamError(f"expected {N_CHUNKS} chunks, got {len(chunks)}")
    if len(header.model_hash) != 8:
        raise BitstreamError("model hash must be 8 bytes")
    if header.codec_config not in CODEC_CONFIG_NAMES:
        raise BitstreamError(f"unknown codec config {header.codec_config}")
    out = bytearray()
    out += MAGIC
    out += struct.pack(">BBBHH", VERSION, header.codec_config, header.flags,
                       header.width, header.height)
    out += header.model_hash
    for chunk in chunks:
        out += struct.pack(">I", len(chunk))
        out += chunk
    return bytes(out)


def unpack_bitstream(data: bytes) -> tuple[BitstreamHeader, list[bytes]]:
    if len(data) < HEADER_BYTES:
        raise BitstreamError(f"stream shorter than header: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise BitstreamError(f"bad magic {data[:4]!r}")
    version, cfg, flags, width, height = struct.unpack_from(">BBBHH", data, 4)
    if version != VERSION:
        raise BitstreamError(f"unsupported bitstream version {version}")
    if cfg not in CODEC_CONFIG_NAMES:
        raise BitstreamError(f"unknown codec config byte {cfg}")
    header = BitstreamHeader(cfg, flags, width, height, data[11:19])
    pos = HEADER_BYTES
    chunks = []
    for i in range(N_CHUNKS):
        if pos + 4 > len(data):
            raise BitstreamError(f"truncated at chunk {i} length field")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + n > len(data):
            raise BitstreamError(f"truncated chunk {i}: wants {n} bytes, {len(data) - pos} left")
        chunks.append(data[pos : pos + n])
        pos += n
    if pos != len(data):
        raise BitstreamError(f"{len(data) - pos} trailing bytes after last chunk")
    return header, chunks
