"""Historical trajectory embedding.

A history of ``T`` slots (boxes or masks) becomes a ``(T+1) x D`` sequence:
sinusoidal spatial codes for boxes, a learned mask token for masked slots, a
learned prediction token appended last, and sinusoidal temporal codes that
number the rows ``T+1, T, ..., 1`` from oldest to the prediction token.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .geometry import BBox


class _MaskSlot:
    __slots__ = ()

    def __repr__(self):
        return "MASK"

    def __reduce__(self):
        return "MASK"


MASK = _MaskSlot()

FREQ_BASE = 10000.0
DEFAULT_SPATIAL_SCALE = 100.0


@dataclass(frozen=True)
class HistoricalTrajectory:
    """Exactly ``T`` slots, oldest first; each slot is a :class:`BBox` or ``MASK``."""

    slots: tuple

    def __post_init__(self):
        if len(self.slots) == 0:
            raise ValueError("a trajectory needs at least one slot")
        for s in self.slots:
            if s is not MASK and not isinstance(s, BBox):
                raise TypeError(f"slot must be BBox or MASK, got {s!r}")

    @property
    def T(self) -> int:
        return len(self.slots)

    @classmethod
    def newborn(cls, box: BBox, T: int) -> "HistoricalTrajectory":
        """Left-pad a single observation with masks."""
        return cls((MASK,) * (T - 1) + (box,))

    @classmethod
    def from_boxes(cls, boxes: Sequence[BBox], T: int) -> "HistoricalTrajectory":
        """Keep the last ``T`` boxes, left-padding with masks if fewer."""
        boxes = tuple(boxes)[-T:]
        return cls((MASK,) * (T - len(boxes)) + boxes)

    def push(self, slot) -> "HistoricalTrajectory":
        """Append the newest slot and evict the oldest."""
        return HistoricalTrajectory(self.slots[1:] + (slot,))

    def n_boxes(self) -> int:
        return sum(1 for s in self.slots if s is not MASK)

    def last_box(self) -> BBox | None:
        for s in reversed(self.slots):
            if s is not MASK:
                return s
        return None

    def recent_boxes(self) -> list[BBox]:
        return [s for s in self.slots if s is not MASK]

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """``(T, 4)`` boxes (zeros under masks) and a ``(T,)`` boolean mask."""
        boxes = np.zeros((self.T, 4))
        mask = np.zeros(self.T, dtype=bool)
        for i, s in enumerate(self.slots):
            if s is MASK:
                mask[i] = True
            else:
                boxes[i] = (s.cx, s.cy, s.w, s.h)
        return boxes, mask


@dataclass
class EmbeddingParams:
    prediction_token: ad.Tensor
    mask_token: ad.Tensor

    @property
    def D(self) -> int:
        return self.prediction_token.shape[0]

    @classmethod
    def init(cls, D: int, rng: np.random.Generator, std: float = 0.02) -> "EmbeddingParams":
        return cls(ad.parameter(rng.normal(0.0, std, D)), ad.parameter(rng.normal(0.0, std, D)))


def _check_spatial_dim(D: int) -> None:
    if D <= 0 or D % 8:
        raise ValueError(f"spatial embedding dimension must be a positive multiple of 8, got {D}")


def spatial_frequencies(D: int) -> np.ndarray:
    """Angular frequencies shared by the four per-coordinate blocks."""
    _check_spatial_dim(D)
    block = D // 4
    i = np.arange(block // 2)
    return FREQ_BASE ** (-2.0 * i / block)


def pe_spat_array(boxes: np.ndarray, D: int, scale: float = DEFAULT_SPATIAL_SCALE) -> np.ndarray:
    """Vectorized spatial code: ``(..., 4)`` boxes to ``(..., D)``."""
    freqs = spatial_frequencies(D)
    boxes = np.asarray(boxes, dtype=np.float64)
    ang = boxes[..., :, None] * scale * freqs  # (..., 4, D/8)
    out = np.empty(boxes.shape[:-1] + (4, D // 4))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out.reshape(boxes.shape[:-1] + (D,))


def pe_spat(b: BBox, D: int, scale: float = DEFAULT_SPATIAL_SCALE) -> np.ndarray:
    return pe_spat_array(np.array(tuple(b)), D, scale)


def pe_temp(k: int, D: int, max_serial: int | None = None) -> np.ndarray:
    """Sinusoidal code of the integer serial ``k`` (even dims sin, odd dims cos)."""
    if k < 1 or (max_serial is not None and k > max_serial):
        raise ValueError(f"serial {k} outside [1, {max_serial}]")
    if D <= 0 or D % 2:
        raise ValueError(f"temporal embedding dimension must be even, got {D}")
    i = np.arange(D // 2)
    ang = k / FREQ_BASE ** (2.0 * i / D)
    out = np.empty(D)
    out[0::2] = np.sin(ang)
    out[1::2] = np.cos(ang)
    return out


def serial_numbers(T: int) -> np.ndarray:
    """Serials for the ``T+1`` rows, front to back: ``T+1, T, ..., 1``."""
    return np.arange(T + 1, 0, -1)


def temporal_table(T: int, D: int) -> np.ndarray:
    return np.stack([pe_temp(int(k), D, T + 1) for k in serial_numbers(T)])


def build_embedding_batch(
    boxes: np.ndarray,
    mask: np.ndarray,
    params: EmbeddingParams,
    scale: float = DEFAULT_SPATIAL_SCALE,
) -> tuple[ad.Tensor, ad.Tensor]:
    """Batched embedding: ``(B, T, 4)`` boxes and ``(B, T)`` mask to ``(Z, X_spat)``.

    Both outputs are ``(B, T+1, D)``. Masked rows take the mask token and
    carry no dependence on the box values underneath them.
    """
    B, T = mask.shape
    D = params.D
    if mask.all(axis=1).any():
        bad = int(np.flatnonzero(mask.all(axis=1))[0])
        raise ValueError(f"trajectory {bad} is entirely masked")
    spatial = np.where(mask[..., None], 0.0, pe_spat_array(boxes, D, scale))
    hist = ad.add(spatial, ad.mul(mask[..., None].astype(np.float64), params.mask_token))
    pred = ad.mul(np.ones((B, 1, 1)), params.prediction_token)
    x_spat = ad.concat([hist, pred], axis=1)
    z = ad.add(x_spat, temporal_table(T, D))
    return z, x_spat


def build_embedding(
    h: HistoricalTrajectory, params: EmbeddingParams, scale: float = DEFAULT_SPATIAL_SCALE
) -> tuple[ad.Tensor, ad.Tensor]:
    """Single-trajectory embedding; both outputs are ``(T+1, D)``."""
    if h.n_boxes() == 0:
        raise ValueError("cannot embed an all-mask trajectory")
    boxes, mask = h.to_arrays()
    z, x = build_embedding_batch(boxes[None], mask[None], params, scale)
    return ad.reshape(z, z.shape[1:]), ad.reshape(x, x.shape[1:])


def stack_histories(hs: Iterable[HistoricalTrajectory]) -> tuple[np.ndarray, np.ndarray]:
    pairs = [h.to_arrays() for h in hs]
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
