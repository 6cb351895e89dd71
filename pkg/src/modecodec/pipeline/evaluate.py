"""Rate-distortion evaluation over a lambda grid of trained checkpoints."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from ..metrics import MsSsimConfig, RDPoint, ms_ssim, write_rd_csv
from ..nn.tensor import Tensor
from .codec import encode_pair
from .data import FramePair
from .system import PFrameSystem, load_system

__all__ = ["evaluate_system", "eval_rd", "DEFAULT_LAMBDA_GRID"]

DEFAULT_LAMBDA_GRID = (0.001, 0.003, 0.01, 0.03)


def evaluate_system(system: PFrameSystem, pairs: list[FramePair],
                    msssim_cfg: MsSsimConfig | None = None) -> RDPoint:
    """Mean actual-coded bpp and MS-SSIM of reconstructions over the pairs."""
    if msssim_cfg is None:
        msssim_cfg = system.config.msssim_config()
    bpps = []
    sims = []
    for pair in pairs:
        enc = encode_pair(system, pair.prev, pair.cur)
        bpps.append(enc.bpp)
        recon = np.clip(enc.xhat, 0.0, 1.0)
        sims.append(ms_ssim(Tensor(recon[None]), Tensor(pair.cur[None]), msssim_cfg).item())
    return RDPoint(bpp=float(np.mean(bpps)), msssim=float(np.mean(sims)))


def eval_rd(checkpoints: dict, pairs: list[FramePair], csv_path=None, figure_path=None):
    """checkpoints: {lambda: checkpoint path}. Missing files are skipped with
    a warning. Returns [(lambda, RDPoint)] sorted by lambda, writes the CSV
    and renders the RD curve figure when paths are given."""
    rows = []
    for lam in sorted(checkpoints):
        path = Path(checkpoints[lam])
        if not path.exists():
            warnings.warn(f"missing checkpoint for lambda={lam}: {path}")
            continue
        system = load_system(path)
        rows.append((lam, evaluate_system(system, pairs)))
    if csv_path is not None:
        write_rd_csv(csv_path, rows)
    if figure_path is not None and rows:
        plot_rd_curve(rows, figure_path)
    return rows


def plot_rd_curve(rows, figure_path, label: str = "trained systems"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    pts = sorted((pt.bpp, pt.msssim_db, lam) for lam, pt in rows)
    ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=label)
    for bpp, db, lam in pts:
        ax.annotate(f"λ={lam:g}", (bpp, db), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("rate [bpp]")
    ax.set_ylabel("MS-SSIM (dB)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(figure_path, dpi=150)
    plt.close(fig)
