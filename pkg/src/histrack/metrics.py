"""CLEAR-MOT (MOTA, ID switches) and identity F1 scoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .association import hungarian
from .geometry import BBox, boxes_to_array, iou_matrix

TrackSet = Mapping[int, Mapping[int, BBox]]

# any forbidden pair costs more than a full row of allowed ones
_FORBIDDEN = 1e6

REPORT_COLUMNS = ("sequence", "mota", "idf1", "idsw", "fp", "fn", "gt")


@dataclass
class EvalReport:
    mota: float
    idf1: float
    id_switches: int
    fp: int
    fn: int
    gt_count: int
    hyp_count: int = 0
    idtp: int = 0
    matches: int = 0
    sweep: list[tuple[float, float]] = field(default_factory=list)  # (threshold, idf1)

    def csv_row(self, sequence: str) -> str:
        return f"{sequence},{self.mota:.6f},{self.idf1:.6f},{self.id_switches},{self.fp},{self.fn},{self.gt_count}"


def by_frame(tracks: TrackSet) -> dict[int, tuple[list[int], np.ndarray]]:
    frames: dict[int, list[tuple[int, BBox]]] = {}
    for tid, per_frame in tracks.items():
        for f, b in per_frame.items():
            frames.setdefault(f, []).append((tid, b))
    out = {}
    for f, items in frames.items():
        items.sort(key=lambda x: x[0])
        out[f] = ([t for t, _ in items], boxes_to_array(b for _, b in items))
    return out


def _frame_matches(
    g_ids: list[int], g_boxes: np.ndarray, h_ids: list[int], h_boxes: np.ndarray, last: dict[int, int], match_iou: float
) -> list[tuple[int, int]]:
    if not g_ids or not h_ids:
        return []
    ious = iou_matrix(g_boxes, h_boxes)
    g_pos = {g: i for i, g in enumerate(g_ids)}
    h_pos = {h: j for j, h in enumerate(h_ids)}
    pairs: list[tuple[int, int]] = []
    used_g, used_h = set(), set()
    for g, h in last.items():
        i, j = g_pos.get(g), h_pos.get(h)
        if i is not None and j is not None and j not in used_h and ious[i, j] >= match_iou:
            pairs.append((i, j))
            used_g.add(i)
            used_h.add(j)
    rows = [i for i in range(len(g_ids)) if i not in used_g]
    cols = [j for j in range(len(h_ids)) if j not in used_h]
    if rows and cols:
        sub = ious[np.ix_(rows, cols)]
        cost = np.where(sub >= match_iou, 1.0 - sub, _FORBIDDEN)
        for a, b in hungarian(cost).matches:
            if sub[a, b] >= match_iou:
                pairs.append((rows[a], cols[b]))
    return [(g_ids[i], h_ids[j]) for i, j in pairs]


def identity_f1(gt: TrackSet, hyp: TrackSet, match_iou: float = 0.5) -> tuple[float, int, int, int]:
    """Exact IDF1 via the identity bipartite matching; returns ``(idf1, idtp, n_gt, n_hyp)``."""
    g_frames, h_frames = by_frame(gt), by_frame(hyp)
    g_index = {g: i for i, g in enumerate(sorted(gt))}
    h_index = {h: j for j, h in enumerate(sorted(hyp))}
    counts = np.zeros((len(g_index), len(h_index)))
    for f, (g_ids, g_boxes) in g_frames.items():
        if f not in h_frames:
            continue
        h_ids, h_boxes = h_frames[f]
        ious = iou_matrix(g_boxes, h_boxes)
        gi, hj = np.nonzero(ious >= match_iou)
        for a, b in zip(gi, hj):
            counts[g_index[g_ids[a]], h_index[h_ids[b]]] += 1
    n_gt = sum(len(v) for v in gt.values())
    n_hyp = sum(len(v) for v in hyp.values())
    idtp = 0
    if counts.size:
        a = hungarian(-counts)
        idtp = int(sum(counts[i, j] for i, j in a.matches))
    if n_gt + n_hyp == 0:
        return 1.0, 0, 0, 0
    return 2.0 * idtp / (n_gt + n_hyp), idtp, n_gt, n_hyp


def evaluate(gt: TrackSet, hyp: TrackSet, match_iou: float = 0.5) -> EvalReport:
    if not 0.0 < match_iou < 1.0:
        raise ValueError(f"match_iou must be in (0, 1), got {match_iou}")
    g_frames, h_frames = by_frame(gt), by_frame(hyp)
    last: dict[int, int] = {}
    fp = fn = idsw = n_match = 0
    gt_count = hyp_count = 0
    for f in sorted(set(g_frames) | set(h_frames)):
        g_ids, g_boxes = g_frames.get(f, ([], np.zeros((0, 4))))
        h_ids, h_boxes = h_frames.get(f, ([], np.zeros((0, 4))))
        gt_count += len(g_ids)
        hyp_count += len(h_ids)
        pairs = _frame_matches(g_ids, g_boxes, h_ids, h_boxes, last, match_iou)
        for g, h in pairs:
            if g in last and last[g] != h:
                idsw += 1
            last[g] = h
        n_match += len(pairs)
        fn += len(g_ids) - len(pairs)
        fp += len(h_ids) - len(pairs)
    idf1, idtp, _, _ = identity_f1(gt, hyp, match_iou)
    mota = 1.0 - (fp + fn + idsw) / gt_count if gt_count else float("nan")
    return EvalReport(mota, idf1, idsw, fp, fn, gt_count, hyp_count, idtp, n_match)


def combine(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool counts over sequences; MOTA and IDF1 are recomputed from the totals."""
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    idsw = sum(r.id_switches for r in reports)
    gt = sum(r.gt_count for r in reports)
    hyp = sum(r.hyp_count for r in reports)
    idtp = sum(r.idtp for r in reports)
    mota = 1.0 - (fp + fn + idsw) / gt if gt else float("nan")
    idf1 = 2.0 * idtp / (gt + hyp) if gt + hyp else 1.0
    return EvalReport(mota, idf1, idsw, fp, fn, gt, hyp, idtp, sum(r.matches for r in reports))


def iou_threshold_sweep(gt: TrackSet, hyp: TrackSet, thresholds: Sequence[float]) -> list[tuple[float, float]]:
    ts = list(thresholds)
    if any(not 0.0 < t < 1.0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError(f"thresholds must be strictly increasing in (0, 1): {ts}")
    return [(t, identity_f1(gt, hyp, t)[0]) for t in ts]


def format_report(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned plain-text table, one row per sequence."""
    header = f"{'sequence':<24}{'MOTA':>9}{'IDF1':>9}{'IDSW':>7}{'FP':>8}{'FN':>8}{'GT':>8}"
    lines = [header, "-" * len(header)]
    for name, r in rows:
        lines.append(f"{name:<24}{r.mota:>9.4f}{r.idf1:>9.4f}{r.id_switches:>7d}{r.fp:>8d}{r.fn:>8d}{r.gt_count:>8d}")
    return "\n".join(lines) + "\n"


def format_csv(rows: Sequence[tuple[str, EvalReport]]) -> str:
    return ",".join(REPORT_COLUMNS) + "\n" + "".join(r.csv_row(name) + "\n" for name, r in rows)
