"""Binary parameter checkpoints.

Layout: magic "MDNW", version byte, then one record per entry:
    u16 BE name length, UTF-8 name,
    dtype byte (0=float32, 1=float64, 2=uint8),
    u8 rank, rank x u32 BE dims,
    raw little-endian element bytes.
Records run to end of file. Round-trips are bit-exact.

Model configuration travels inside the checkpoint as a uint8 entry named
"__config__" holding the JSON-encoded architecture, so a checkpoint is
self-describing.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

__all__ = ["save_arrays", "load_arrays", "CheckpointError", "digest"]

MAGIC = b"MDNW"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("uint8"): 2}


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""


def _encode_records(arrays: dict[str, np.ndarray]) -> bytes:
    out = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        code = _DTYPE_CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for entry '{name}'")
        nb = name.encode("utf-8")
        out += struct.pack(">H", len(nb)) + nb
        out.append(code)
        out.append(arr.ndim)
        for d in arr.shape:
            out += struct.pack(">I", d)
        if code == 2:
            out += arr.tobytes()
        else:
            out += arr.astype(_DTYPES[code]).tobytes()
    return bytes(out)


def save_arrays(path, arrays: dict[str, np.ndarray]):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([VERSION]))
        f.write(_encode_records(arrays))


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if blob[4] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob[4]}")
    pos = 5
    arrays: dict[str, np.ndarray] = {}
    while pos < len(blob):
        try:
            (nlen,) = struct.unpack_from(">H", blob, pos)
            pos += 2
            name = blob[pos : pos + nlen].decode("utf-8")
            pos += nlen
            code = blob[pos]
            rank = blob[pos + 1]
            pos += 2
            dims = struct.unpack_from(f">{rank}I", blob, pos) if rank else ()
            pos += 4 * rank
            dt = _DTYPES[code]
            count = int(np.prod(dims)) if rank else 1
            nbytes = count * dt.itemsize
            if pos + nbytes > len(blob):
                raise CheckpointError(f"truncated data for entry '{name}'")
            arrays[name] = np.frombuffer(blob[pos : pos + nbytes], dtype=dt).reshape(dims).copy()
            pos += nbytes
        except (struct.error, KeyError, IndexError) as e:
            raise CheckpointError(f"corrupt checkpoint record at byte {pos}: {e}") from e
    return arrays


def digest(arrays: dict[str, np.ndarray]) -> bytes:
    """8-byte model hash over the canonical record encoding."""
    return hashlib.sha256(_encode_records(arrays)).digest()[:8]
