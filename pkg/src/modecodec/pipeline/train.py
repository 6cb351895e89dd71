"""Two-stage training: content-coder warm-up, then alternating epochs.

During warm-up only the content coder learns (the mode network, if any, is
frozen at its fresh state and keeps emitting alpha = 0.5). Alternating
epochs then train one network at a time, starting with the mode network.
Without a mode network every epoch is a content-coder epoch and the system
is the coder-only baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn import tensor as T
from ..nn.optim import Adam, TrainingError, lr_at_epoch
from ..nn.tensor import Tensor
from .data import FramePair
from .system import PFrameSystem, save_system

__all__ = ["TrainSchedule", "TrainingAborted", "train", "EpochLog"]


class TrainingAborted(RuntimeError):
    """Training hit NaN; carries the last good checkpoint path."""

    def __init__(self, msg: str, last_checkpoint: str | None):
        super().__init__(msg)
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class TrainSchedule:
    warmup_epochs: int = 2
    alternate_epochs: int = 8
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.warmup_epochs < 1:
            raise ValueError(f"warm-up needs at least 1 epoch, got {self.warmup_epochs}")
        if self.batch_size < 1 or self.alternate_epochs < 0:
            raise ValueError("bad schedule: batch_size >= 1, alternate_epochs >= 0")

    @property
    def total_epochs(self) -> int:
        return self.warmup_epochs + self.alternate_epochs

    def stage_of(self, epoch: int, has_modenet: bool) -> str:
        if epoch < self.warmup_epochs or not has_modenet:
            return "warmup" if epoch < self.warmup_epochs else "codec"
        return "mode" if (epoch - self.warmup_epochs) % 2 == 0 else "codec"


@dataclass
class EpochLog:
    epoch: int
    stage: str
    loss: float
    distortion: float
    rm_bpp: float
    rc_bpp: float


def _batches(pairs: list[FramePair], batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(pairs))
    n_full = max(1, len(pairs) // batch_size) if len(pairs) >= batch_size else 1
    for bi in range(n_full):
        idx = order[bi * batch_size : (bi + 1) * batch_size]
        if idx.size == 0:
            break
        prev = np.stack([pairs[i].prev for i in idx])
        cur = np.stack([pairs[i].cur for i in idx])
        yield Tensor(prev), Tensor(cur)


def write_loss_log(path, rows: list[EpochLog]):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["epoch", "stage", "loss", "distortion", "rm_bpp", "rc_bpp"])
        for r in rows:
            wr.writerow([r.epoch, r.stage, f"{r.loss:.6f}", f"{r.distortion:.6f}",
                         f"{r.rm_bpp:.6f}", f"{r.rc_bpp:.6f}"])


def train(system: PFrameSystem, pairs: list[FramePair], schedule: TrainSchedule,
          out_dir=None, quiet: bool = True) -> list[EpochLog]:
    """Run the schedule; returns the per-epoch log. Checkpoints land in
    out_dir (epoch_NNN.ckpt plus final.ckpt) when it is given."""
    if not pairs:
        raise ValueError("training dataset is empty")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(schedule.seed)
    opt = Adam(list(system.named_parameters()), lr=schedule.lr)
    logs: list[EpochLog] = []
    last_ckpt = None
    has_mode = system.modenet is not None
    for epoch in range(schedule.total_epochs):
        stage = schedule.stage_of(epoch, has_mode)
        system.set_stage(stage)
        opt.lr = lr_at_epoch(schedule.lr, epoch, schedule.total_epochs)
        sums = np.zeros(4)
        n_batches = 0
        for prev, cur in _batches(pairs, schedule.batch_size, rng):
            opt.zero_grad()
            out, loss = system.forward_train(prev, cur, rng)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise TrainingAborted(
                    f"non-finite loss at epoch {epoch} ({stage})",
                    str(last_ckpt) if last_ckpt else None)
            loss.backward()
            try:
                opt.step()
            except TrainingError as e:
                raise TrainingAborted(f"epoch {epoch} ({stage}): {e}",
                                      str(last_ckpt) if last_ckpt else None) from e
            n, _, h, w = cur.shape
            pixels = n * h * w
            rm = out.rm_bits.item() if isinstance(out.rm_bits, Tensor) else float(out.rm_bits)
            rc = out.rc_bits.item() if isinstance(out.rc_bits, Tensor) else float(out.rc_bits)
            rate_bpp = (rm + rc) / pixels
            sums += (loss_val, loss_val - system.config.lam * rate_bpp, rm / pixels, rc / pixels)
            n_batches += 1
        mean = sums / n_batches
        logs.append(EpochLog(epoch=epoch, stage=stage, loss=mean[0],
                             distortion=mean[1], rm_bpp=mean[2], rc_bpp=mean[3]))
        if not quiet:
            print(f"epoch {epoch:3d} [{stage:6s}] loss {mean[0]:.4f} "
                  f"D {mean[1]:.4f} Rm {mean[2]:.4f} Rc {mean[3]:.4f}")
        if out_dir is not None and (epoch + 1) % schedule.checkpoint_every == 0:
            last_ckpt = out_dir / f"epoch_{epoch:03d}.ckpt"
            save_system(last_ckpt, system)
    system.set_stage("all")
    if out_dir is not None:
        save_system(out_dir / "final.ckpt", system)
        write_loss_log(out_dir / "loss_log.csv", logs)
    return logs
