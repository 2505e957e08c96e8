"""Tracking-by-detection loop: predict, associate, update, manage lifecycles."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .association import COST_PROFILES, DEFAULT_COST_PROFILE, CostWeights, build_cost, gate_and_assign
from .embedding import MASK, HistoricalTrajectory
from .geometry import BBox, boxes_to_array, iou_matrix
from .kalman import KalmanConfig, KalmanState, kf_init, kf_predict, kf_update
from .model import ModelParams, predict_batch
from .synth import Detection


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"


@dataclass
class Track:
    id: int
    state: TrackState
    history: HistoricalTrajectory
    hits: int = 1
    misses: int = 0
    last_prediction: BBox | None = None
    activated: bool = False


@dataclass(frozen=True)
class AssocConfig:
    weights: CostWeights = COST_PROFILES[DEFAULT_COST_PROFILE]
    iou_threshold: float = 0.3
    dtheta_k: int = 3


@dataclass(frozen=True)
class LifecycleConfig:
    min_hits: int = 3
    max_age: int = 30
    min_confidence: float = 0.4
    unmatched_update: str = "mask"  # or "prediction"

    def __post_init__(self):
        if self.unmatched_update not in ("mask", "prediction"):
            raise ValueError(f"unmatched_update must be 'mask' or 'prediction', got {self.unmatched_update!r}")
        if self.min_hits < 1 or self.max_age < 0:
            raise ValueError("min_hits must be >= 1 and max_age >= 0")


@dataclass(frozen=True)
class OutputRecord:
    frame: int
    id: int
    box: BBox


class FrameOrderError(ValueError):
    pass


# -- predictors --------------------------------------------------------------


class MotionPredictor:
    """Interface shared by the transformer and Kalman predictors.

    ``predict`` is called once per frame with every live track; the
    lifecycle hooks let stateful predictors follow along.
    """

    name = "base"

    def predict(self, tracks: Sequence[Track]) -> list[BBox]:
        raise NotImplementedError

    def on_birth(self, track: Track, box: BBox) -> None:
        pass

    def on_match(self, track: Track, box: BBox) -> None:
        pass

    def on_miss(self, track: Track) -> None:
        pass

    def on_remove(self, track: Track) -> None:
        pass


class TransformerPredictor(MotionPredictor):
    name = "transformer"

    def __init__(self, params: ModelParams):
        self.params = params

    @property
    def history_len(self) -> int:
        return self.params.config.history_len

    def predict(self, tracks):
        return predict_batch([t.history for t in tracks], self.params)


class KalmanPredictor(MotionPredictor):
    name = "kalman"

    def __init__(self, config: KalmanConfig = KalmanConfig()):
        self.config = config
        self.states: dict[int, KalmanState] = {}

    def predict(self, tracks):
        out = []
        for t in tracks:
            self.states[t.id], box = kf_predict(self.states[t.id], self.config)
            out.append(box)
        return out

    def on_birth(self, track, box):
        self.states[track.id] = kf_init(box, self.config)

    def on_match(self, track, box):
        self.states[track.id] = kf_update(self.states[track.id], box, self.config)

    def on_remove(self, track):
        self.states.pop(track.id, None)


# -- tracker -------------------------------------------------------------------


@dataclass
class Tracker:
    predictor: MotionPredictor
    history_len: int = 30
    assoc: AssocConfig = field(default_factory=AssocConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    tracks: list[Track] = field(default_factory=list)
    next_id: int = 1
    last_frame: int = 0

    @property
    def effective_max_age(self) -> int:
        # with mask updates a track must keep at least one observed slot
        if self.lifecycle.unmatched_update == "mask":
            return min(self.lifecycle.max_age, self.history_len - 1)
        return self.lifecycle.max_age

    def step(self, frame: int, detections: Sequence[Detection]) -> list[OutputRecord]:
        if frame <= self.last_frame:
            raise FrameOrderError(f"frame {frame} does not follow frame {self.last_frame}")
        for d in detections:
            if d.frame != frame:
                raise FrameOrderError(f"detection from frame {d.frame} passed with frame {frame}")
        self.last_frame = frame
        lc = self.lifecycle
        dets = [d for d in detections if d.confidence >= lc.min_confidence]
        det_boxes = [d.box for d in dets]

        preds = self.predictor.predict(self.tracks) if self.tracks else []
        for t, p in zip(self.tracks, preds):
            t.last_prediction = p
        P, D = boxes_to_array(preds), boxes_to_array(det_boxes)
        ious = iou_matrix(P, D)
        cost = build_cost(preds, det_boxes, [t.history for t in self.tracks], self.assoc.weights, self.assoc.dtheta_k, iou=ious)
        assignment = gate_and_assign(cost, ious, self.assoc.iou_threshold)

        records: list[OutputRecord] = []
        for i, j in assignment.matches:
            t = self.tracks[i]
            box = det_boxes[j]
            t.history = t.history.push(box)
            t.hits += 1
            t.misses = 0
            if t.state is TrackState.LOST or (t.state is TrackState.TENTATIVE and t.hits >= lc.min_hits):
                t.state = TrackState.ACTIVE
                t.activated = True
            self.predictor.on_match(t, box)
            if t.state is TrackState.ACTIVE:
                records.append(OutputRecord(frame, t.id, box))

        removed: set[int] = set()
        for i in assignment.unmatched_predictions:
            t = self.tracks[i]
            t.history = t.history.push(preds[i] if lc.unmatched_update == "prediction" else MASK)
            t.misses += 1
            t.hits = 0
            self.predictor.on_miss(t)
            if t.state is TrackState.TENTATIVE or t.misses > self.effective_max_age:
                removed.add(t.id)
            else:
                t.state = TrackState.LOST
        if removed:
            for t in self.tracks:
                if t.id in removed:
                    self.predictor.on_remove(t)
            self.tracks = [t for t in self.tracks if t.id not in removed]

        for j in assignment.unmatched_detections:
            box = det_boxes[j]
            t = Track(self.next_id, TrackState.TENTATIVE, HistoricalTrajectory.newborn(box, self.history_len))
            self.next_id += 1
            if lc.min_hits <= 1:
                t.state = TrackState.ACTIVE
                t.activated = True
                records.append(OutputRecord(frame, t.id, box))
            self.predictor.on_birth(t, box)
            self.tracks.append(t)
        records.sort(key=lambda r: r.id)
        return records


def step(
    tracker: Tracker, frame: int, detections: Sequence[Detection]
) -> tuple[list[Track], list[OutputRecord]]:
    records = tracker.step(frame, detections)
    return tracker.tracks, records


def run_sequence(
    detections: Mapping[int, Sequence[Detection]],
    predictor: MotionPredictor,
    history_len: int = 30,
    assoc: AssocConfig = AssocConfig(),
    lifecycle: LifecycleConfig = LifecycleConfig(),
    n_frames: int | None = None,
) -> dict[int, dict[int, BBox]]:
    """Track a whole sequence; frames without detections still advance the tracker."""
    tracker = Tracker(predictor, history_len, assoc, lifecycle)
    last = max(detections, default=0)
    if n_frames is not None:
        last = max(last, n_frames)
    out: dict[int, dict[int, BBox]] = {}
    for frame in range(1, last + 1):
        for r in tracker.step(frame, detections.get(frame, [])):
            out.setdefault(r.id, {})[frame] = r.box
    return out


def make_predictor(kind: str, params: ModelParams | None = None, kalman: KalmanConfig = KalmanConfig()) -> MotionPredictor:
    if kind == "kalman":
        return KalmanPredictor(kalman)
    if kind == "transformer":
        if params is None:
            raise ValueError("the transformer predictor needs model parameters")
        return TransformerPredictor(params)
    raise ValueError(f"unknown predictor {kind!r}")
