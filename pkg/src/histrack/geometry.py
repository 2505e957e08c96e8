"""Bounding-box geometry in normalized center format.

Every box inside the toolkit is ``(cx, cy, w, h)`` normalized by the image
size. Pixel coordinates only appear at the file boundary (see ``mot_io``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _accel


@dataclass(frozen=True, slots=True)
class BBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size {vals}")

    def __iter__(self):
        yield self.cx
        yield self.cy
        yield self.w
        yield self.h

    def as_array(self) -> np.ndarray:
        return np.array((self.cx, self.cy, self.w, self.h), dtype=np.float64)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "BBox":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True, slots=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")


def center_to_corner(b: BBox) -> tuple[float, float, float, float]:
    hw, hh = b.w / 2.0, b.h / 2.0
    return (b.cx - hw, b.cy - hh, b.cx + hw, b.cy + hh)


def corner_to_center(x1: float, y1: float, x2: float, y2: float) -> BBox:
    return BBox((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)


def normalize(pixel_box: Sequence[float], dims: ImageDims) -> BBox:
    """Pixel center-format ``(cx, cy, w, h)`` to a normalized :class:`BBox`."""
    W, H = float(dims.width), float(dims.height)
    cx, cy, w, h = pixel_box
    return BBox(cx / W, cy / H, w / W, h / H)


def denormalize(b: BBox, dims: ImageDims) -> tuple[float, float, float, float]:
    W, H = float(dims.width), float(dims.height)
    return (b.cx * W, b.cy * H, b.w * W, b.h * H)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ax1, ay1, ax2, ay2 = center_to_corner(a)
    bx1, by1, bx2, by2 = center_to_corner(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    # areas from the same corners, so identical boxes give inter == union exactly
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def l1_box_distance(a: BBox, b: BBox) -> float:
    return abs(a.cx - b.cx) + abs(a.cy - b.cy) + abs(a.w - b.w) + abs(a.h - b.h)


def boxes_to_array(boxes: Iterable[BBox]) -> np.ndarray:
    arr = np.array([tuple(b) for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


# -- batched kernels -------------------------------------------------------


@_accel.njit
def _iou_matrix_jit(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        ax1 = a[i, 0] - a[i, 2] / 2.0
        ay1 = a[i, 1] - a[i, 3] / 2.0
        ax2 = a[i, 0] + a[i, 2] / 2.0
        ay2 = a[i, 1] + a[i, 3] / 2.0
        area_a = (ax2 - ax1) * (ay2 - ay1)
        for j in range(m):
            bx1 = b[j, 0] - b[j, 2] / 2.0
            by1 = b[j, 1] - b[j, 3] / 2.0
            bx2 = b[j, 0] + b[j, 2] / 2.0
            by2 = b[j, 1] + b[j, 3] / 2.0
            iw = min(ax2, bx2) - max(ax1, bx1)
            ih = min(ay2, by2) - max(ay1, by1)
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            union = area_a + (bx2 - bx1) * (by2 - by1) - inter
            if union > 0.0:
                v = inter / union
                out[i, j] = min(max(v, 0.0), 1.0)
    return out


def _iou_matrix_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    def corners(x):
        return x[:, 0] - x[:, 2] / 2.0, x[:, 1] - x[:, 3] / 2.0, x[:, 0] + x[:, 2] / 2.0, x[:, 1] + x[:, 3] / 2.0

    ax1, ay1, ax2, ay2 = (c[:, None] for c in corners(a))
    bx1, by1, bx2, by2 = (c[None, :] for c in corners(b))
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between ``(n, 4)`` and ``(m, 4)`` center-format arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    if _accel.USE_NUMBA:
        return _iou_matrix_jit(a, b)
    return _iou_matrix_np(a, b)


def l1_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)
