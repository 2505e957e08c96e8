"""Association costs and optimal assignment.

``hungarian`` solves the rectangular assignment problem exactly with the
O(n^3) shortest-augmenting-path form of the Hungarian method. The numba
kernel and the vectorized numpy kernel run the same algorithm; which one is
used is decided by ``histrack._accel``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from .embedding import HistoricalTrajectory
from .geometry import BBox, boxes_to_array, iou_matrix, l1_matrix


@dataclass
class Assignment:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_predictions: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)

    def total_cost(self, cost: np.ndarray) -> float:
        return float(sum(cost[i, j] for i, j in self.matches))


@dataclass(frozen=True)
class CostWeights:
    iou: float = 1.0
    l1: float = 1.0
    dtheta: float = 0.0

    def __post_init__(self):
        if min(self.iou, self.l1, self.dtheta) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.iou == 0 and self.l1 == 0 and self.dtheta == 0:
            raise ValueError("at least one cost weight must be positive")


COST_PROFILES = {
    "iou": CostWeights(1.0, 0.0, 0.0),
    "iou_dtheta": CostWeights(1.0, 0.0, 1.0),
    "iou_l1": CostWeights(1.0, 1.0, 0.0),
    "iou_dtheta_l1": CostWeights(1.0, 1.0, 1.0),
}
DEFAULT_COST_PROFILE = "iou_l1"


# -- square Hungarian kernels --------------------------------------------------


@_accel.njit
def _hungarian_square_jit(c):
    n = c.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row


def _hungarian_square_np(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row


def solve_square(c: np.ndarray, use_numba: bool | None = None) -> np.ndarray:
    """Column assigned to each row of a square cost matrix."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    return _hungarian_square_jit(c) if use_numba else _hungarian_square_np(c)


def hungarian(cost, use_numba: bool | None = None) -> Assignment:
    """Minimum-cost matching covering ``min(rows, cols)`` pairs.

    Rectangular inputs are padded to square with a constant sentinel above
    every real cost; padded pairs come back as unmatched.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix contains non-finite entries")
    n, m = c.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))
    k = max(n, m)
    if n != m:
        sentinel = float(np.abs(c).max()) + 1.0
        sq = np.full((k, k), sentinel)
        sq[:n, :m] = c
    else:
        sq = c
    col = solve_square(sq, use_numba)
    matches = [(i, int(col[i])) for i in range(n) if col[i] < m]
    matched_cols = {j for _, j in matches}
    return Assignment(
        matches,
        [i for i in range(n) if col[i] >= m],
        [j for j in range(m) if j not in matched_cols],
    )


# -- cost construction -------------------------------------------------------


def direction_difference(history: HistoricalTrajectory | None, det: BBox, k: int = 3) -> float:
    """Angle between the track's recent heading and the step to ``det``, over pi.

    The heading runs from the center ``k`` observations back to the newest
    observed center. Zero-length vectors give 0.
    """
    if history is None:
        return 0.0
    boxes = history.recent_boxes()
    if len(boxes) < 2:
        return 0.0
    last = boxes[-1]
    prev = boxes[max(0, len(boxes) - 1 - k)]
    ax, ay = last.cx - prev.cx, last.cy - prev.cy
    bx, by = det.cx - last.cx, det.cy - last.cy
    na, nb = math.hypot(ax, ay), math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        return 0.0
    cos = max(-1.0, min(1.0, (ax * bx + ay * by) / (na * nb)))
    return math.acos(cos) / math.pi


def build_cost(
    preds: Sequence[BBox],
    dets: Sequence[BBox],
    histories: Sequence[HistoricalTrajectory] | None = None,
    weights: CostWeights = COST_PROFILES[DEFAULT_COST_PROFILE],
    k: int = 3,
    iou: np.ndarray | None = None,
) -> np.ndarray:
    """``w_iou * (1 - IoU) + w_l1 * L1 + w_dtheta * direction difference``."""
    P, D = boxes_to_array(preds), boxes_to_array(dets)
    cost = np.zeros((len(P), len(D)))
    if weights.iou:
        cost += weights.iou * (1.0 - (iou if iou is not None else iou_matrix(P, D)))
    if weights.l1:
        cost += weights.l1 * l1_matrix(P, D)
    if weights.dtheta:
        hs = histories if histories is not None else [None] * len(P)
        dt = np.array([[direction_difference(h, d, k) for d in dets] for h in hs]).reshape(len(P), len(D))
        cost += weights.dtheta * dt
    return cost


def gate_and_assign(cost: np.ndarray, iou: np.ndarray, iou_threshold: float) -> Assignment:
    """Hungarian on ``cost``, then drop any pair whose IoU is below the gate."""
    if not 0.0 <= iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1), got {iou_threshold}")
    a = hungarian(cost)
    kept, rej_p, rej_d = [], [], []
    for i, j in a.matches:
        if iou[i, j] < iou_threshold:
            rej_p.append(i)
            rej_d.append(j)
        else:
            kept.append((i, j))
    return Assignment(
        kept,
        sorted(a.unmatched_predictions + rej_p),
        sorted(a.unmatched_detections + rej_d),
    )
