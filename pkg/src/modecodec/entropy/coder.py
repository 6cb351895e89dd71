"""Carry-less range coder, 64-bit state, 16-bit probability precision.

Classic Subbotin construction: bytes are emitted once the top byte of the
interval is settled; when the range gets too small without settling, it is
clamped to the distance to the next 2^32 boundary, which wastes a fraction of
a bit but guarantees no carry propagation. All arithmetic is integer, so
encoder and decoder stay in lockstep on any platform.
"""

from __future__ import annotations

from bisect import bisect_right

from .cdf import CdfRow, TOTAL_FREQ

__all__ = ["RangeEncoder", "RangeDecoder", "CoderError", "FLUSH_BYTES"]

MASK = (1 << 64) - 1
TOP = 1 << 56
BOT = 1 << 32
FLUSH_BYTES = 8


class CoderError(ValueError):
    """Corrupt or truncated coded stream."""


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK
        self.out = bytearray()

    def _normalize(self):
        low, rng, out = self.low, self.range, self.out
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = (-low) & (BOT - 1)
            else:
                break
            out.append((low >> 56) & 0xFF)
            low = (low << 8) & MASK
            rng <<= 8
        self.low, self.range = low, rng

    def encode_span(self, cum_lo: int, cum_hi: int):
        """Encode a symbol occupying [cum_lo, cum_hi) of the 2^16 total."""
        r = self.range >> 16
        self.low = (self.low + r * cum_lo) & MASK
        self.range = r * (cum_hi - cum_lo)
        self._normalize()

    def encode_byte_raw(self, byte: int):
        self.encode_span(byte << 8, (byte + 1) << 8)

    def encode_value(self, row: CdfRow, t: int):
        lo, hi, escaped = row.span(t)
        self.encode_span(lo, hi)
        if escaped:
            u = t & 0xFFFFFFFF
            for shift in (24, 16, 8, 0):
                self.encode_byte_raw((u >> shift) & 0xFF)

    def finish(self) -> bytes:
        low = self.low
        for _ in range(FLUSH_BYTES):
            self.out.append((low >> 56) & 0xFF)
            low = (low << 8) & MASK
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.low = 0
        self.range = MASK
        self.code = 0
        if len(data) < FLUSH_BYTES:
            raise CoderError(f"stream too short: {len(data)} bytes")
        for _ in range(FLUSH_BYTES):
            self.code = (self.code << 8) | self._pull()

    def _pull(self) -> int:
        if self.pos >= len(self.data):
            raise CoderError(f"truncated stream: read past byte {self.pos}")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def _normalize(self):
        low, rng = self.low, self.range
        code = self.code
        while True:
            if (low ^ (low + rng)) < TOP:
                pass
            elif rng < BOT:
                rng = (-low) & (BOT - 1)
            else:
                break
            code = ((code << 8) | self._pull()) & MASK
            low = (low << 8) & MASK
            rng <<= 8
        self.low, self.range, self.code = low, rng, code

    def _target(self) -> int:
        r = self.range >> 16
        v = ((self.code - self.low) & MASK) // r
        return min(v, TOTAL_FREQ - 1)

    def _consume(self, cum_lo: int, cum_hi: int):
        r = self.range >> 16
        self.low = (self.low + r * cum_lo) & MASK
        self.range = r * (cum_hi - cum_lo)
        self._normalize()

    def decode_byte_raw(self) -> int:
        byte = self._target() >> 8
        self._consume(byte << 8, (byte + 1) << 8)
        return byte

    def decode_value(self, row: CdfRow) -> int:
        v = self._target()
        i = bisect_right(row.cum, v) - 1
        self._consume(row.cum[i], row.cum[i + 1])
        if i == len(row.freqs) - 1:  # escape
            u = 0
            for _ in range(4):
                u = (u << 8) | self.decode_byte_raw()
            return u - (1 << 32) if u >= (1 << 31) else u
        return row.t_lo + i

    def bytes_consumed(self) -> int:
        return self.pos
