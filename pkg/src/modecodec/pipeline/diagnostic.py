"""Post-hoc analysis: per-pixel rate maps and the copy/transmit comparator.

The comparator evaluates, per pixel, whether copying the prediction beats
transmitting (copy-distortion <= coded-distortion + lambda * pixel-rate) and
reports how well that set agrees with the learned partition. It never feeds
back into coding; distortion uses a squared-error proxy and the pixel rate
comes from spreading each latent's coded bits uniformly over its stride
block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import SystemOutput

__all__ = ["project_rate_map", "codec_rate_map", "diagnostic_partition", "PartitionDiagnostic"]


def project_rate_map(bits_map: np.ndarray, stride: int, out_h: int, out_w: int) -> np.ndarray:
    """Spread each latent's bits uniformly over its stride x stride block."""
    per_pos = bits_map.sum(axis=1)[0] / float(stride * stride)
    big = np.kron(per_pos, np.ones((stride, stride), dtype=per_pos.dtype))
    return big[:out_h, :out_w]


def codec_rate_map(out: SystemOutput, main_stride: int, hyper_stride: int,
                   h: int, w: int) -> np.ndarray:
    """Per-pixel bits of the content coder (main + hyper latents)."""
    if out.codec_code is None:
        return np.zeros((h, w))
    rmap = project_rate_map(out.codec_code.y_bits_map, main_stride, h, w)
    rmap += project_rate_map(out.codec_code.z_bits_map, main_stride * hyper_stride, h, w)
    return rmap


@dataclass
class PartitionDiagnostic:
    d_copy: np.ndarray          # per-pixel squared error of copying the prediction
    d_coded: np.ndarray         # per-pixel squared error of the system output
    rate: np.ndarray            # per-pixel bits
    lam: float
    copy_set: np.ndarray        # bool: pixels where copy wins the comparison
    ell: np.ndarray             # comparator value; NaN where rate is zero
    undefined_rate: np.ndarray  # bool: pixels with zero rate (comparator undefined)
    alpha_copy: np.ndarray | None = None  # bool: learned alpha < 0.5
    agreement: float | None = None

    @property
    def transmit_set(self) -> np.ndarray:
        return ~self.copy_set


def diagnostic_partition(x_pred: np.ndarray, x: np.ndarray, xhat: np.ndarray,
                         rate_map: np.ndarray, lam: float,
                         alpha: np.ndarray | None = None) -> PartitionDiagnostic:
    """All frame inputs are (3, H, W); rate_map and alpha are (H, W)."""
    d_copy = ((x_pred - x) ** 2).sum(axis=0)
    d_coded = ((xhat - x) ** 2).sum(axis=0)
    undefined = rate_map <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = np.where(undefined, np.nan, (d_copy - d_coded) / np.where(undefined, 1.0, rate_map))
    # pixels with zero rate have nothing to gain from transmission: copy
    copy_set = np.where(undefined, True, d_copy <= d_coded + lam * rate_map)
    alpha_copy = None
    agreement = None
    if alpha is not None:
        alpha_copy = alpha < 0.5
        agreement = float((copy_set == alpha_copy).mean())
    return PartitionDiagnostic(
        d_copy=d_copy, d_coded=d_coded, rate=rate_map, lam=lam,
        copy_set=copy_set, ell=ell, undefined_rate=undefined,
        alpha_copy=alpha_copy, agreement=agreement,
    )
