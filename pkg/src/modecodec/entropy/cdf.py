"""Integer CDF tables for bit-exact coding.

Encoder and decoder both quantize the per-element Laplace parameters — mu to
1/64 steps, b to 64 logarithmic bins — and derive the same integer CDF row.
Symbols are re-centered by the integer part of the quantized mean, so a row
only depends on (scale bin, fractional-mean bin): 64 x 64 rows total.

Each row keeps a contiguous support of symbols whose exact bin mass is at
least half a probability quantum; everything outside the support is routed
through a trailing escape symbol followed by a raw 32-bit payload. Row
frequencies sum to exactly 2^16 with every kept symbol and the escape getting
at least one quantum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .laplace import B_MAX, B_MIN
from .quantize import SYMBOL_BOUND, round_half_away

__all__ = ["CdfTable", "CdfRow", "get_table", "PRECISION_BITS", "TOTAL_FREQ", "ESCAPE_PAYLOAD_BITS"]

PRECISION_BITS = 16
TOTAL_FREQ = 1 << PRECISION_BITS
SCALE_BINS = 64
MU_STEPS = 64
ESCAPE_PAYLOAD_BITS = 32
_SUPPORT_THRESHOLD = 0.5 / TOTAL_FREQ  # half a quantum


@dataclass(frozen=True)
class CdfRow:
    t_lo: int
    t_hi: int
    freqs: tuple          # len = support size + 1 (escape last)
    cum: tuple            # len = len(freqs) + 1; cum[0] == 0, cum[-1] == TOTAL_FREQ
    bits: tuple           # cost in bits per entry; escape entry includes payload

    def span(self, t: int):
        """(cum_lo, cum_hi, escaped) for symbol value t."""
        if self.t_lo <= t <= self.t_hi:
            i = t - self.t_lo
            return self.cum[i], self.cum[i + 1], False
        return self.cum[-2], self.cum[-1], True

    def cost_bits(self, t: int) -> float:
        if self.t_lo <= t <= self.t_hi:
            return self.bits[t - self.t_lo]
        return self.bits[-1]


def _laplace_cdf(t: np.ndarray, b: float) -> np.ndarray:
    half_tail = 0.5 * np.exp(-np.abs(t) / b)
    return np.where(t < 0, half_tail, 1.0 - half_tail)


class CdfTable:
    """All (scale bin, mean-fraction bin) CDF rows for a symbol alphabet."""

    def __init__(self, bound: int = SYMBOL_BOUND, b_min: float = B_MIN, b_max: float = B_MAX):
        self.bound = bound
        self.b_min = b_min
        self.b_max = b_max
        self._log_lo = math.log(b_min)
        self._log_step = (math.log(b_max) - math.log(b_min)) / (SCALE_BINS - 1)
        self.scale_reps = np.exp(self._log_lo + self._log_step * np.arange(SCALE_BINS))
        t = np.arange(-bound, bound + 1, dtype=np.float64)
        self.rows: list[list[CdfRow]] = []
        for b_idx in range(SCALE_BINS):
            b = float(self.scale_reps[b_idx])
            per_scale = []
            for f_idx in range(MU_STEPS):
                frac = (f_idx - MU_STEPS // 2) / MU_STEPS
                p = _laplace_cdf(t - frac + 0.5, b) - _laplace_cdf(t - frac - 0.5, b)
                per_scale.append(self._build_row(t, p))
            self.rows.append(per_scale)

    def _build_row(self, t: np.ndarray, p: np.ndarray) -> CdfRow:
        keep = p >= _SUPPORT_THRESHOLD
        if not keep.any():
            keep[int(np.argmax(p))] = True
        idx = np.flatnonzero(keep)
        lo, hi = int(idx[0]), int(idx[-1])
        kept = p[lo : hi + 1]
        esc_mass = max(0.0, 1.0 - float(kept.sum()))
        masses = np.append(kept, esc_mass)
        raw = masses * TOTAL_FREQ
        freqs = np.maximum(1, np.floor(raw).astype(np.int64))
        diff = TOTAL_FREQ - int(freqs.sum())
        if diff > 0:
            # largest-remainder apportionment; min-1 bumped entries have
            # negative remainders and naturally sort last
            rem = raw - freqs
            order = np.lexsort((np.arange(raw.size), -rem))
            freqs[order[:diff]] += 1
        while diff < 0:
            j = int(np.argmax(freqs))
            take = min(int(freqs[j]) - 1, -diff)
            freqs[j] -= take
            diff += take
        cum = np.concatenate(([0], np.cumsum(freqs)))
        assert cum[-1] == TOTAL_FREQ
        assert np.all(np.diff(cum) >= 1), "CDF must be strictly increasing"
        bits = -np.log2(freqs / TOTAL_FREQ)
        bits[-1] += ESCAPE_PAYLOAD_BITS
        t_lo = int(t[lo])
        return CdfRow(
            t_lo=t_lo,
            t_hi=int(t[hi]),
            freqs=tuple(int(f) for f in freqs),
            cum=tuple(int(c) for c in cum),
            bits=tuple(float(x) for x in bits),
        )

    # -- parameter binning ---------------------------------------------------

    def scale_bin(self, b: np.ndarray) -> np.ndarray:
        b = np.clip(np.asarray(b, dtype=np.float64), self.b_min, self.b_max)
        idx = np.rint((np.log(b) - self._log_lo) / self._log_step).astype(np.int64)
        return np.clip(idx, 0, SCALE_BINS - 1)

    @staticmethod
    def mean_bins(mu: np.ndarray):
        """Split quantized means into integer offset k and fraction bin index."""
        m64 = round_half_away(np.asarray(mu, dtype=np.float64) * MU_STEPS)
        k = np.floor_divide(m64 + MU_STEPS // 2, MU_STEPS)
        f_idx = (m64 - MU_STEPS * k) + MU_STEPS // 2
        return k, f_idx

    def element_rows(self, mu: np.ndarray, b: np.ndarray):
        """Per-element (k offsets, row objects) for flat mu/b arrays."""
        k, f_idx = self.mean_bins(mu)
        b_idx = self.scale_bin(b)
        rows = [self.rows[bi][fi] for bi, fi in zip(b_idx.reshape(-1), f_idx.reshape(-1))]
        return k.reshape(-1), rows

    def table_bits(self, symbols: np.ndarray, mu: np.ndarray, b: np.ndarray) -> float:
        """Exact code cost in bits of symbols under the quantized table rows."""
        k, rows = self.element_rows(mu, b)
        t = symbols.reshape(-1) - k
        return float(sum(row.cost_bits(int(ti)) for row, ti in zip(rows, t)))


@lru_cache(maxsize=4)
def get_table(bound: int = SYMBOL_BOUND, b_min: float = B_MIN, b_max: float = B_MAX) -> CdfTable:
    return CdfTable(bound, b_min, b_max)
