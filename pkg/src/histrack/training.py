"""Windowed training of the motion predictor with masked-token augmentation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .embedding import MASK, HistoricalTrajectory
from .geometry import BBox
from .model import ModelParams, forward_arrays
from .optim import AdamState, adam_step, clip_global_norm

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectorySegment:
    history: tuple[BBox, ...]
    target: BBox
    track_id: int = 0


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 50
    batch_size: int = 512
    mask_prob: float = 0.1
    seed: int = 0
    clip_norm: float | None = None
    val_fraction: float = 0.1
    lr_schedule: str = "constant"  # or "cosine": decay to 0 over all steps

    def lr_at(self, step: int, total: int) -> float:
        if self.lr_schedule == "constant" or total <= 1:
            return self.lr
        return 0.5 * self.lr * (1.0 + math.cos(math.pi * step / total))

    def __post_init__(self):
        if not 0.0 <= self.mask_prob < 1.0:
            raise ValueError(f"mask_prob must be in [0, 1), got {self.mask_prob}")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.epochs < 0 or self.batch_size <= 0:
            raise ValueError("epochs must be >= 0 and batch_size > 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")


@dataclass
class SegmentArrays:
    """Stacked segments: histories ``(N, T, 4)``, targets ``(N, 4)``, ids ``(N,)``."""

    histories: np.ndarray
    targets: np.ndarray
    track_ids: np.ndarray

    def __len__(self):
        return self.targets.shape[0]

    def subset(self, idx) -> "SegmentArrays":
        return SegmentArrays(self.histories[idx], self.targets[idx], self.track_ids[idx])

    @classmethod
    def from_segments(cls, segments: Sequence[TrajectorySegment]) -> "SegmentArrays":
        if not segments:
            return cls(np.zeros((0, 0, 4)), np.zeros((0, 4)), np.zeros(0, dtype=np.int64))
        return cls(
            np.array([[tuple(b) for b in s.history] for s in segments], dtype=np.float64),
            np.array([tuple(s.target) for s in segments], dtype=np.float64),
            np.array([s.track_id for s in segments], dtype=np.int64),
        )


@dataclass
class TrainResult:
    params: ModelParams
    trace: list[tuple[int, float, float]] = field(default_factory=list)  # epoch, train, val

    def trace_csv(self) -> str:
        lines = ["epoch,mean_loss,val_loss"]
        lines += [f"{e},{tr:.9f},{va:.9f}" for e, tr, va in self.trace]
        return "\n".join(lines) + "\n"


def _runs(frames: Sequence[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for f in frames:
        if runs and f == runs[-1][-1] + 1:
            runs[-1].append(f)
        else:
            runs.append([f])
    return runs


def segment_trajectories(tracks: Mapping[int, Mapping[int, BBox]], T: int) -> list[TrajectorySegment]:
    """Stride-1 windows of ``T + 1`` consecutive frames within each identity."""
    out: list[TrajectorySegment] = []
    for tid in sorted(tracks):
        per_frame = tracks[tid]
        for run in _runs(sorted(per_frame)):
            boxes = [per_frame[f] for f in run]
            for s in range(len(boxes) - T):
                out.append(TrajectorySegment(tuple(boxes[s : s + T]), boxes[s + T], tid))
    return out


def segment_arrays(tracks: Mapping[int, Mapping[int, BBox]], T: int, id_offset: int = 0) -> SegmentArrays:
    """Array form of :func:`segment_trajectories` without per-box objects."""
    hists, targets, ids = [], [], []
    for tid in sorted(tracks):
        per_frame = tracks[tid]
        for run in _runs(sorted(per_frame)):
            arr = np.array([tuple(per_frame[f]) for f in run], dtype=np.float64)
            n = arr.shape[0] - T
            if n <= 0:
                continue
            win = np.lib.stride_tricks.sliding_window_view(arr, (T + 1, 4))[:, 0]
            hists.append(win[:, :T])
            targets.append(win[:, T])
            ids.append(np.full(n, tid + id_offset, dtype=np.int64))
    if not hists:
        return SegmentArrays(np.zeros((0, T, 4)), np.zeros((0, 4)), np.zeros(0, dtype=np.int64))
    return SegmentArrays(np.concatenate(hists), np.concatenate(targets), np.concatenate(ids))


def sample_masks(n: int, T: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Bernoulli(p) slot masks; a fully masked row keeps its newest slot."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"mask probability must be in [0, 1), got {p}")
    mask = rng.random((n, T)) < p
    full = mask.all(axis=1)
    mask[full, T - 1] = False
    return mask


def apply_mask_augmentation(seg: TrajectorySegment, p: float, rng: np.random.Generator) -> HistoricalTrajectory:
    m = sample_masks(1, len(seg.history), p, rng)[0]
    return HistoricalTrajectory(tuple(MASK if mk else b for b, mk in zip(seg.history, m)))


def l1_loss(pred, gt) -> ad.Tensor:
    """Mean absolute error over ``(cx, cy, w, h)``; batches average over rows too."""
    if isinstance(pred, BBox):
        pred = ad.Tensor(pred.as_array(), requires_grad=True)
    if isinstance(gt, BBox):
        gt = gt.as_array()
    return ad.mean(ad.abs_(ad.sub(pred, gt)))


def split_by_identity(data: SegmentArrays, fraction: float, rng: np.random.Generator) -> tuple[SegmentArrays, SegmentArrays]:
    ids = np.unique(data.track_ids)
    if fraction <= 0 or len(ids) < 2:
        return data, data.subset(np.zeros(0, dtype=np.int64))
    n_val = max(1, int(round(fraction * len(ids))))
    val_ids = rng.choice(ids, size=n_val, replace=False)
    is_val = np.isin(data.track_ids, val_ids)
    return data.subset(~is_val), data.subset(is_val)


def evaluate_loss(params: ModelParams, data: SegmentArrays, batch_size: int = 512) -> float:
    if len(data) == 0:
        return float("nan")
    total = 0.0
    no_mask = np.zeros(data.histories.shape[:2], dtype=bool)
    for s in range(0, len(data), batch_size):
        pred = forward_arrays(data.histories[s : s + batch_size], no_mask[s : s + batch_size], params).data
        total += float(np.abs(pred - data.targets[s : s + batch_size]).mean(axis=1).sum())
    return total / len(data)


def predict_arrays(params: ModelParams, histories: np.ndarray, batch_size: int = 512) -> np.ndarray:
    no_mask = np.zeros(histories.shape[:2], dtype=bool)
    return np.concatenate(
        [forward_arrays(histories[s : s + batch_size], no_mask[s : s + batch_size], params).data for s in range(0, len(histories), batch_size)]
    )


def train(
    segments: SegmentArrays | Sequence[TrajectorySegment],
    model: ModelParams,
    cfg: TrainConfig,
    validation: SegmentArrays | None = None,
) -> TrainResult:
    """Adam on the batch-mean L1 loss, masks resampled every epoch.

    Without an explicit ``validation`` set, ``cfg.val_fraction`` of the
    identities are held out. ``model`` is updated in place and returned.
    """
    data = segments if isinstance(segments, SegmentArrays) else SegmentArrays.from_segments(list(segments))
    if len(data) == 0:
        raise TrainingError("no training segments")
    rng = np.random.default_rng(cfg.seed)
    if validation is None:
        data, validation = split_by_identity(data, cfg.val_fraction, rng)
    T = data.histories.shape[1]
    if T != model.config.history_len:
        raise TrainingError(f"segments have T={T}, model expects {model.config.history_len}")

    arrays = model.arrays()
    state = AdamState.zeros_like(arrays)
    result = TrainResult(model)
    step = 0
    total_steps = cfg.epochs * math.ceil(len(data) / cfg.batch_size)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        masks = sample_masks(len(data), T, cfg.mask_prob, rng)
        losses = []
        for b, s in enumerate(range(0, len(data), cfg.batch_size)):
            idx = order[s : s + cfg.batch_size]
            model.zero_grad()
            try:
                pred = forward_arrays(data.histories[idx], masks[idx], model)
                loss = l1_loss(pred, data.targets[idx])
                loss.backward()
            except ad.NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch} batch {b}: {exc}") from exc
            grads = {k: t.grad for k, t in model.tensors.items() if t.grad is not None}
            if cfg.clip_norm:
                clip_global_norm(grads, cfg.clip_norm)
            adam_step(arrays, grads, state, lr=cfg.lr_at(step, total_steps))
            losses.append(loss.item() * len(idx))
            step += 1
        train_loss = float(np.sum(losses) / len(data))
        if not np.isfinite(train_loss):
            raise TrainingError(f"epoch {epoch}: non-finite loss")
        val_loss = evaluate_loss(model, validation) if len(validation) else float("nan")
        result.trace.append((epoch, train_loss, val_loss))
        log.info("epoch %d  loss %.6f  val %.6f", epoch, train_loss, val_loss)
    return result


def gather_segments(track_sets: Iterable[Mapping[int, Mapping[int, BBox]]], T: int) -> SegmentArrays:
    """Segments from several sequences, keeping identities distinct across them."""
    parts = []
    offset = 0
    for ts in track_sets:
        parts.append(segment_arrays(ts, T, id_offset=offset))
        offset += (max(ts) if ts else 0) + 1
    if not parts:
        return SegmentArrays(np.zeros((0, T, 4)), np.zeros((0, 4)), np.zeros(0, dtype=np.int64))
    return SegmentArrays(
        np.concatenate([p.histories for p in parts]),
        np.concatenate([p.targets for p in parts]),
        np.concatenate([p.track_ids for p in parts]),
    )
