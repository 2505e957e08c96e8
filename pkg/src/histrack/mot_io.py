"""MOTChallenge text files and sequence directories.

A line is ``frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]`` in
pixels; world coordinates are ignored on input and never written. Pixel
fields are emitted with 2 decimals, confidence with 6.

A sequence directory holds ``seqinfo.ini`` (image size), ``gt/gt.txt`` and
``det/det.txt``. Tracker results are one ``<sequence>.txt`` per sequence.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .geometry import BBox, ImageDims
from .synth import Detection, Generated, TrackSet

DEFAULT_DIMS = ImageDims(1920, 1080)


class MotFormatError(ValueError):
    """Malformed MOT line; carries file and line number when known."""


@dataclass(frozen=True)
class MotRecord:
    frame: int
    id: int
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def to_bbox(self, dims: ImageDims) -> BBox:
        W, H = float(dims.width), float(dims.height)
        return BBox((self.x1 + self.x2) / 2.0 / W, (self.y1 + self.y2) / 2.0 / H, self.width / W, self.height / H)

    @classmethod
    def from_bbox(cls, frame: int, id_: int, b: BBox, confidence: float, dims: ImageDims) -> "MotRecord":
        W, H = float(dims.width), float(dims.height)
        left = (b.cx - b.w / 2.0) * W
        top = (b.cy - b.h / 2.0) * H
        return cls(frame, id_, left, top, left + b.w * W, top + b.h * H, confidence)


_FIELD_NAMES = ("frame", "id", "bb_left", "bb_top", "bb_width", "bb_height", "conf")


def parse_mot_line(line: str, *, where: str = "") -> MotRecord:
    prefix = f"{where}: " if where else ""
    parts = [p.strip() for p in line.strip().split(",")]
    if not 7 <= len(parts) <= 10:
        raise MotFormatError(f"{prefix}expected 7 to 10 comma-separated fields, got {len(parts)}")
    vals = []
    for k, p in enumerate(parts[:7]):
        try:
            vals.append(float(p))
        except ValueError:
            raise MotFormatError(f"{prefix}field {k + 1} ({_FIELD_NAMES[k]}) is not numeric: {p!r}") from None
    frame, id_ = vals[0], vals[1]
    if frame != int(frame) or frame < 1:
        raise MotFormatError(f"{prefix}field 1 (frame) must be a positive integer, got {parts[0]!r}")
    if id_ != int(id_) or (id_ < 1 and id_ != -1):
        raise MotFormatError(f"{prefix}field 2 (id) must be a positive integer or -1, got {parts[1]!r}")
    left, top, w, h, conf = vals[2:7]
    if w < 0 or h < 0:
        raise MotFormatError(f"{prefix}negative box size {w}x{h}")
    return MotRecord(int(frame), int(id_), left, top, left + w, top + h, conf)


def format_mot_line(r: MotRecord) -> str:
    return f"{r.frame},{r.id},{r.x1:.2f},{r.y1:.2f},{r.width:.2f},{r.height:.2f},{r.confidence:.6f}"


def read_mot_file(path: str | Path) -> list[MotRecord]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            out.append(parse_mot_line(line, where=f"{path}:{lineno}"))
    return out


def write_mot_file(path: str | Path, records: Iterable[MotRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    recs = sorted(records, key=lambda r: (r.frame, r.id))
    path.write_text("".join(format_mot_line(r) + "\n" for r in recs))


# -- conversions -------------------------------------------------------------


def tracks_to_records(tracks: Mapping[int, Mapping[int, BBox]], dims: ImageDims, confidence: float = 1.0) -> list[MotRecord]:
    return [
        MotRecord.from_bbox(f, tid, b, confidence, dims)
        for tid, per_frame in tracks.items()
        for f, b in per_frame.items()
    ]


def records_to_tracks(records: Iterable[MotRecord], dims: ImageDims) -> TrackSet:
    out: TrackSet = {}
    for r in records:
        out.setdefault(r.id, {})[r.frame] = r.to_bbox(dims)
    return out


def detections_to_records(dets: Mapping[int, list[Detection]], dims: ImageDims) -> list[MotRecord]:
    return [MotRecord.from_bbox(f, -1, d.box, d.confidence, dims) for f in sorted(dets) for d in dets[f]]


def records_to_detections(records: Iterable[MotRecord], dims: ImageDims) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for r in records:
        conf = min(max(r.confidence, 0.0), 1.0)
        out.setdefault(r.frame, []).append(Detection(r.to_bbox(dims), conf, r.frame))
    return out


# -- sequence directories ----------------------------------------------------


def write_seqinfo(seq_dir: Path, name: str, n_frames: int, dims: ImageDims, frame_rate: int = 20) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["Sequence"] = {
        "name": name,
        "frameRate": str(frame_rate),
        "seqLength": str(n_frames),
        "imWidth": str(dims.width),
        "imHeight": str(dims.height),
    }
    seq_dir.mkdir(parents=True, exist_ok=True)
    with (seq_dir / "seqinfo.ini").open("w") as fh:
        cp.write(fh)


def read_seqinfo(seq_dir: str | Path) -> tuple[str, int, ImageDims]:
    seq_dir = Path(seq_dir)
    path = seq_dir / "seqinfo.ini"
    if not path.exists():
        return seq_dir.name, 0, DEFAULT_DIMS
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(path)
    s = cp["Sequence"]
    return s.get("name", seq_dir.name), int(s.get("seqLength", 0)), ImageDims(int(s["imWidth"]), int(s["imHeight"]))


def emit_mot_files(generated: Generated, directory: str | Path, dims: ImageDims = DEFAULT_DIMS) -> Path:
    """Write one sequence directory for a generated scenario; returns its path."""
    seq_dir = Path(directory) / generated.scenario.name
    write_seqinfo(seq_dir, generated.scenario.name, generated.n_frames, dims)
    write_mot_file(seq_dir / "gt" / "gt.txt", tracks_to_records(generated.ground_truth, dims))
    write_mot_file(seq_dir / "det" / "det.txt", detections_to_records(generated.detections, dims))
    return seq_dir


def find_sequences(root: str | Path, marker: str) -> list[Path]:
    """Sequence directories under ``root`` (inclusive) that contain ``marker``."""
    root = Path(root)
    if (root / marker).exists():
        return [root]
    return sorted(p.parent.parent for p in root.glob(f"*/{marker}"))


def read_ground_truth(seq_dir: str | Path) -> TrackSet:
    _, _, dims = read_seqinfo(seq_dir)
    return records_to_tracks(read_mot_file(Path(seq_dir) / "gt" / "gt.txt"), dims)


def read_detections(seq_dir: str | Path) -> dict[int, list[Detection]]:
    _, _, dims = read_seqinfo(seq_dir)
    return records_to_detections(read_mot_file(Path(seq_dir) / "det" / "det.txt"), dims)


def write_results(path: str | Path, tracks: Mapping[int, Mapping[int, BBox]], dims: ImageDims) -> None:
    write_mot_file(path, tracks_to_records(tracks, dims))


def read_results(path: str | Path, dims: ImageDims) -> TrackSet:
    return records_to_tracks(read_mot_file(path), dims)
