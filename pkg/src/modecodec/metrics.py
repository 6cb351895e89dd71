"""Distortion metrics and the rate-distortion objective.

MS-SSIM is built from tensor-core ops so the training loss can differentiate
through it. Contrast/structure terms are averaged at every scale, luminance
only at the coarsest, and the per-scale means are combined geometrically with
the published exponent set (renormalized to sum to one).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .nn import tensor as T
from .nn.functional import avg_pool2, conv2d
from .nn.tensor import ShapeError, Tensor

__all__ = ["MsSsimConfig", "RDPoint", "ms_ssim", "msssim_db", "rd_loss", "write_rd_csv", "read_rd_csv"]

_WANG_EXPONENTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class MsSsimConfig:
    scales: int = 5
    exponents: tuple = _WANG_EXPONENTS
    window: int = 11
    sigma: float = 1.5
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2

    def __post_init__(self):
        if len(self.exponents) != self.scales:
            raise ValueError(f"{self.scales} scales need {self.scales} exponents, got {len(self.exponents)}")

    @property
    def norm_exponents(self) -> tuple:
        s = sum(self.exponents)
        return tuple(w / s for w in self.exponents)

    @staticmethod
    def small_image(scales: int = 3) -> "MsSsimConfig":
        """Reduced-scale variant for small training crops (3 scales fit 64px)."""
        return MsSsimConfig(scales=scales, exponents=_WANG_EXPONENTS[:scales])

    def min_size(self) -> int:
        return self.window * 2 ** (self.scales - 1)


def _gaussian_kernel(window: int, sigma: float, dtype):
    """Separable pair: vertical (1,1,k,1) and horizontal (1,1,1,k) taps."""
    half = (window - 1) / 2.0
    x = np.arange(window, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    g = g.astype(dtype)
    return g.reshape(1, 1, window, 1), g.reshape(1, 1, 1, window)


def _blur(x: Tensor, kernel) -> Tensor:
    kv, kh = kernel
    n, c, h, w = x.shape
    flat = T.reshape(x, (n * c, 1, h, w))
    out = conv2d(flat, kv, None, stride=1, padding=0)
    out = conv2d(out, kh, None, stride=1, padding=0)
    _, _, ho, wo = out.shape
    return T.reshape(out, (n, c, ho, wo))


def _ssim_terms(a: Tensor, b: Tensor, kernel: Tensor, c1: float, c2: float):
    mu1 = _blur(a, kernel)
    mu2 = _blur(b, kernel)
    mu1_sq = T.square(mu1)
    mu2_sq = T.square(mu2)
    mu12 = T.mul(mu1, mu2)
    sigma1_sq = T.sub(_blur(T.square(a), kernel), mu1_sq)
    sigma2_sq = T.sub(_blur(T.square(b), kernel), mu2_sq)
    sigma12 = T.sub(_blur(T.mul(a, b), kernel), mu12)
    cs_map = T.div(T.add(T.mul(sigma12, 2.0), c2), T.add(T.add(sigma1_sq, sigma2_sq), c2))
    l_map = T.div(T.add(T.mul(mu12, 2.0), c1), T.add(T.add(mu1_sq, mu2_sq), c1))
    return l_map, cs_map


def ms_ssim(a: Tensor, b: Tensor, cfg: MsSsimConfig = MsSsimConfig()) -> Tensor:
    """Multi-scale structural similarity, averaged over channels and batch.

    Inputs are expected in [0, 1]. Spatial dims must be at least
    window * 2^(scales-1) and divisible by 2^(scales-1).
    """
    if a.shape != b.shape:
        raise ShapeError(f"ms_ssim: shapes differ {tuple(a.shape)} vs {tuple(b.shape)}")
    n, c, h, w = a.shape
    need = cfg.min_size()
    down = 2 ** (cfg.scales - 1)
    if h < need or w < need or h % down or w % down:
        raise ShapeError(
            f"ms_ssim: {h}x{w} input too small or not divisible by {down} for "
            f"{cfg.scales} scales (needs >= {need}px per side); use fewer scales, "
            f"e.g. MsSsimConfig.small_image()"
        )
    kv, kh = _gaussian_kernel(cfg.window, cfg.sigma, a.data.dtype)
    kernel = (Tensor(kv), Tensor(kh))
    weights = cfg.norm_exponents
    result = None
    for scale in range(cfg.scales):
        l_map, cs_map = _ssim_terms(a, b, kernel, cfg.c1, cfg.c2)
        if scale == cfg.scales - 1:
            term = T.mean(T.mul(l_map, cs_map))
        else:
            term = T.mean(cs_map)
            a = avg_pool2(a)
            b = avg_pool2(b)
        # geometric combination needs positive terms; degenerate inputs are
        # floored far below any realistic similarity value
        term = T.maximum(term, 1e-12)
        powed = T.exp(T.mul(T.log(term), weights[scale]))
        result = powed if result is None else T.mul(result, powed)
    return result


def msssim_db(v: float) -> float:
    """-10*log10(1 - v) with v clamped just below 1 to stay finite."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"ms-ssim value {v} outside [0, 1]")
    return -10.0 * math.log10(1.0 - min(v, 1.0 - 1e-10))


def rd_loss(
    xhat: Tensor,
    x: Tensor,
    rm_bits,
    rc_bits,
    lam: float,
    cfg: MsSsimConfig = MsSsimConfig(),
    pixels: int | None = None,
) -> Tensor:
    """Distortion plus lambda-weighted rate: (1 - ms_ssim) + lam*(Rm+Rc)/pixels.

    Rates are total bits (scalars or scalar Tensors); pixels defaults to the
    spatial size of x so the rate term is in bits per pixel.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    if pixels is None:
        pixels = x.shape[2] * x.shape[3]
    distortion = T.sub(Tensor(np.ones((), dtype=x.data.dtype)), ms_ssim(xhat, x, cfg))
    rm = rm_bits if isinstance(rm_bits, Tensor) else Tensor(np.asarray(rm_bits, dtype=x.data.dtype))
    rc = rc_bits if isinstance(rc_bits, Tensor) else Tensor(np.asarray(rc_bits, dtype=x.data.dtype))
    rate_bpp = T.mul(T.add(rm, rc), 1.0 / float(pixels))
    return T.add(distortion, T.mul(rate_bpp, float(lam)))


@dataclass(frozen=True)
class RDPoint:
    bpp: float
    msssim: float
    msssim_db: float = field(default=None)

    def __post_init__(self):
        if self.msssim_db is None:
            object.__setattr__(self, "msssim_db", msssim_db(self.msssim))

    @staticmethod
    def from_bits(total_bits: float, pixels: int, msssim: float) -> "RDPoint":
        return RDPoint(bpp=total_bits / pixels, msssim=msssim)


def write_rd_csv(path, rows):
    """rows: iterable of (lambda, RDPoint)."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["lambda", "bpp", "msssim", "msssim_db"])
        for lam, pt in rows:
            wr.writerow([f"{lam:g}", f"{pt.bpp:.6f}", f"{pt.msssim:.8f}", f"{pt.msssim_db:.4f}"])


def read_rd_csv(path):
    out = []
    with open(path, newline="") as f:
        rd = csv.DictReader(f)
        for rec in rd:
            out.append((float(rec["lambda"]),
                        RDPoint(bpp=float(rec["bpp"]), msssim=float(rec["msssim"]),
                                msssim_db=float(rec["msssim_db"]))))
    return out
