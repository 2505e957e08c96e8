"""Deterministic synthetic tracking scenarios.

Trajectories are generated in normalized coordinates, frames numbered from
1. Each object keeps a fixed box size (optionally swapping width and height
over ten frames), and its center stays inside the image with reflective
borders. Detections are ground truth plus Gaussian noise, omitted inside
occlusion windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import BBox

MOTION_KINDS = ("Linear", "Sinusoidal", "DirectionShift", "Crossing")

# id -> {frame -> box}
TrackSet = dict[int, dict[int, BBox]]


@dataclass(frozen=True)
class Detection:
    box: BBox
    confidence: float
    frame: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.frame < 1:
            raise ValueError(f"frame numbers start at 1, got {self.frame}")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    n_objects: int = 4
    n_frames: int = 200
    motion_kind: str = "Linear"  # one kind, or a comma list assigned round-robin
    occlusion_windows: tuple[tuple[int, int, int], ...] = ()
    detection_noise_std: float = 0.0
    seed: int = 0
    speed: tuple[float, float] = (0.004, 0.012)
    size_range: tuple[float, float] = (0.05, 0.15)
    sin_amplitude: tuple[float, float] = (0.08, 0.2)
    sin_period: tuple[float, float] = (30.0, 60.0)
    shift_period: tuple[int, int] = (25, 50)
    shape_shift: bool = False
    confidence_range: tuple[float, float] = (0.6, 1.0)

    def __post_init__(self):
        if self.n_frames <= 0 or self.n_objects < 0:
            raise ValueError("n_frames must be positive and n_objects non-negative")
        if self.detection_noise_std < 0:
            raise ValueError("detection_noise_std must be non-negative")
        for k in self.kinds:
            if k not in MOTION_KINDS:
                raise ValueError(f"unknown motion kind {k!r}; expected one of {MOTION_KINDS}")
        for obj, start, end in self.occlusion_windows:
            if not (1 <= start <= end <= self.n_frames):
                raise ValueError(f"occlusion window {(obj, start, end)} outside [1, {self.n_frames}]")
            if not 1 <= obj <= self.n_objects:
                raise ValueError(f"occlusion window names unknown object {obj}")

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k.strip() for k in self.motion_kind.split(",") if k.strip())


@dataclass
class Generated:
    scenario: Scenario
    ground_truth: TrackSet
    detections: dict[int, list[Detection]] = field(default_factory=dict)
    det_ids: dict[int, list[int]] = field(default_factory=dict)  # source object per detection

    @property
    def n_frames(self) -> int:
        return self.scenario.n_frames


# -- closed-form motion primitives ----------------------------------------


def reflect(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold ``x`` into ``[lo, hi]`` as if bouncing off both ends; identity inside."""
    x = np.asarray(x, dtype=np.float64)
    span = hi - lo
    if span <= 0:
        return np.full_like(x, (lo + hi) / 2.0)
    inside = (x >= lo) & (x <= hi)
    y = np.mod(x - lo, 2.0 * span)
    y = np.where(y > span, 2.0 * span - y, y) + lo
    return np.where(inside, x, y)


def _frames(n_frames: int) -> np.ndarray:
    return np.arange(1, n_frames + 1, dtype=np.float64)


def _sizes(w: float, h: float, n_frames: int, shift_at: int | None) -> tuple[np.ndarray, np.ndarray]:
    ws = np.full(n_frames, w)
    hs = np.full(n_frames, h)
    if shift_at is not None:
        f = _frames(n_frames)
        a = np.clip((f - shift_at) / 10.0, 0.0, 1.0)
        ws = w + (h - w) * a
        hs = h + (w - h) * a
    return ws, hs


def linear_track(p0, v, size, n_frames: int, shape_shift_at: int | None = None) -> np.ndarray:
    """Constant velocity: center at frame ``f`` is ``p0 + v * f``, reflected at borders."""
    f = _frames(n_frames)
    ws, hs = _sizes(size[0], size[1], n_frames, shape_shift_at)
    mx, my = max(size) / 2.0, max(size) / 2.0
    cx = reflect(p0[0] + v[0] * f, mx, 1.0 - mx)
    cy = reflect(p0[1] + v[1] * f, my, 1.0 - my)
    return np.stack([cx, cy, ws, hs], axis=1)


def sinusoidal_track(c0, amplitude, omega, phase, cy0, vy, size, n_frames: int, shape_shift_at=None) -> np.ndarray:
    """``cx(f) = c0 + A sin(omega f + phase)``; ``cy`` moves linearly with reflection."""
    f = _frames(n_frames)
    ws, hs = _sizes(size[0], size[1], n_frames, shape_shift_at)
    m = max(size) / 2.0
    cx = c0 + amplitude * np.sin(omega * f + phase)
    cy = reflect(cy0 + vy * f, m, 1.0 - m)
    return np.stack([cx, cy, ws, hs], axis=1)


def direction_shift_track(
    p0, v, size, n_frames: int, shift_frames: Sequence[int], angles: Sequence[float], shape_shift_at=None
) -> np.ndarray:
    """Piecewise constant velocity; at each shift frame the velocity rotates by the given angle.

    The first position is ``p0 + v``; the rotated velocity applies to the
    displacement that lands on the shift frame. Borders reflect the velocity.
    """
    ws, hs = _sizes(size[0], size[1], n_frames, shape_shift_at)
    m = max(size) / 2.0
    lo, hi = m, 1.0 - m
    rot = dict(zip((int(s) for s in shift_frames), angles))
    pos = np.array(p0, dtype=np.float64)
    vel = np.array(v, dtype=np.float64)
    out = np.empty((n_frames, 4))
    for i in range(n_frames):
        frame = i + 1
        if frame in rot:
            c, s = math.cos(rot[frame]), math.sin(rot[frame])
            vel = np.array([c * vel[0] - s * vel[1], s * vel[0] + c * vel[1]])
        pos = pos + vel
        for d in range(2):
            if pos[d] < lo:
                pos[d] = 2 * lo - pos[d]
                vel[d] = -vel[d]
            elif pos[d] > hi:
                pos[d] = 2 * hi - pos[d]
                vel[d] = -vel[d]
        out[i] = (pos[0], pos[1], ws[i], hs[i])
    return out


def crossing_pair(center, direction, speed, offset, sizes, n_frames: int, cross_frame: float) -> tuple[np.ndarray, np.ndarray]:
    """Two objects moving in opposite directions along one line, meeting at ``cross_frame``.

    ``offset`` separates the two lanes perpendicular to the motion. Both
    reflect at the borders, so long sequences cross repeatedly.
    """
    f = _frames(n_frames)
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    n = np.array([-u[1], u[0]])
    out = []
    for sign, size in zip((1.0, -1.0), sizes):
        m = max(size) / 2.0
        d = sign * speed * (f - cross_frame)
        cx = center[0] + u[0] * d + sign * n[0] * offset / 2.0
        cy = center[1] + u[1] * d + sign * n[1] * offset / 2.0
        out.append(
            np.stack(
                [reflect(cx, m, 1.0 - m), reflect(cy, m, 1.0 - m), np.full(n_frames, size[0]), np.full(n_frames, size[1])],
                axis=1,
            )
        )
    return out[0], out[1]


# -- scenario generation -----------------------------------------------------


def _object_kinds(s: Scenario) -> list[str]:
    kinds = s.kinds
    out: list[str] = []
    i = 0
    while len(out) < s.n_objects:
        k = kinds[i % len(kinds)]
        i += 1
        if k == "Crossing":
            if s.n_objects - len(out) < 2:
                k = "Linear"
            else:
                out += ["Crossing", "Crossing"]
                continue
        out.append(k)
    return out


def _draw_size(rng, s: Scenario) -> tuple[float, float]:
    return (float(rng.uniform(*s.size_range)), float(rng.uniform(*s.size_range)))


def _draw_velocity(rng, s: Scenario) -> np.ndarray:
    speed = rng.uniform(*s.speed)
    ang = rng.uniform(0.0, 2 * math.pi)
    return np.array([speed * math.cos(ang), speed * math.sin(ang)])


def _shape_shift_frame(rng, s: Scenario) -> int | None:
    if not s.shape_shift:
        return None
    return int(rng.integers(max(1, s.n_frames // 4), max(2, 3 * s.n_frames // 4)))


def trajectories(s: Scenario) -> dict[int, np.ndarray]:
    """Noise-free ``(n_frames, 4)`` box arrays keyed by object id (1-based)."""
    rng = np.random.default_rng(s.seed)
    kinds = _object_kinds(s)
    out: dict[int, np.ndarray] = {}
    obj = 0
    while obj < s.n_objects:
        kind = kinds[obj]
        oid = obj + 1
        size = _draw_size(rng, s)
        m = max(size) / 2.0
        shape_at = _shape_shift_frame(rng, s)
        if kind == "Linear":
            p0 = rng.uniform(m, 1.0 - m, 2)
            out[oid] = linear_track(p0, _draw_velocity(rng, s), size, s.n_frames, shape_at)
        elif kind == "Sinusoidal":
            amp = float(rng.uniform(*s.sin_amplitude))
            amp = min(amp, 0.5 - m - 1e-3)
            c0 = float(rng.uniform(m + amp, 1.0 - m - amp))
            omega = 2 * math.pi / float(rng.uniform(*s.sin_period))
            phase = float(rng.uniform(0, 2 * math.pi))
            cy0 = float(rng.uniform(m, 1.0 - m))
            vy = float(rng.uniform(-s.speed[1], s.speed[1]) / 2.0)
            out[oid] = sinusoidal_track(c0, amp, omega, phase, cy0, vy, size, s.n_frames, shape_at)
        elif kind == "DirectionShift":
            p0 = rng.uniform(m, 1.0 - m, 2)
            shifts = []
            f = int(rng.integers(*s.shift_period))
            while f <= s.n_frames:
                shifts.append(f)
                f += int(rng.integers(*s.shift_period))
            angles = [
                float(rng.uniform(math.pi / 2, math.pi)) * (1.0 if rng.random() < 0.5 else -1.0) for _ in shifts
            ]
            out[oid] = direction_shift_track(p0, _draw_velocity(rng, s), size, s.n_frames, shifts, angles, shape_at)
        else:  # Crossing
            size_b = _draw_size(rng, s)
            center = rng.uniform(0.3, 0.7, 2)
            ang = rng.uniform(0, 2 * math.pi)
            speed = float(rng.uniform(*s.speed))
            offset = float(rng.uniform(0.0, 0.5)) * min(min(size), min(size_b))
            cross = s.n_frames / 2.0 + float(rng.uniform(-0.5, 0.5))
            a, b = crossing_pair(center, (math.cos(ang), math.sin(ang)), speed, offset, (size, size_b), s.n_frames, cross)
            out[oid], out[oid + 1] = a, b
            obj += 1
        obj += 1
    return out


def generate(s: Scenario) -> Generated:
    tracks = trajectories(s)
    # separate stream so detection noise does not perturb motion draws
    rng = np.random.default_rng([s.seed, 1])
    occluded: set[tuple[int, int]] = set()
    for obj, start, end in s.occlusion_windows:
        occluded.update((obj, f) for f in range(start, end + 1))
    gt: TrackSet = {oid: {} for oid in tracks}
    dets: dict[int, list[Detection]] = {}
    det_ids: dict[int, list[int]] = {}
    for i in range(s.n_frames):
        frame = i + 1
        frame_dets: list[Detection] = []
        frame_ids: list[int] = []
        for oid in sorted(tracks):
            row = tracks[oid][i]
            gt[oid][frame] = BBox.from_array(row)
            noise = rng.normal(0.0, s.detection_noise_std, 4) if s.detection_noise_std > 0 else np.zeros(4)
            conf = float(rng.uniform(*s.confidence_range))
            if (oid, frame) in occluded:
                continue
            noisy = row + noise
            noisy[2:] = np.maximum(noisy[2:], 1e-4)
            frame_dets.append(Detection(BBox.from_array(noisy), round(conf, 6), frame))
            frame_ids.append(oid)
        dets[frame] = frame_dets
        det_ids[frame] = frame_ids
    return Generated(s, gt, dets, det_ids)


# -- presets -----------------------------------------------------------------


def dance_toy(seed: int = 0, n_frames: int = 600, occlusion_len: int = 8, **overrides) -> Scenario:
    """Default non-linear benchmark: 8 objects, mixed dance-like motion, two occlusions."""
    rng = np.random.default_rng([seed, 7])
    base = dict(
        name=f"dance-toy-{seed}",
        n_objects=8,
        n_frames=n_frames,
        motion_kind="Sinusoidal,DirectionShift,Crossing",
        detection_noise_std=0.002,
        seed=seed,
    )
    base.update(overrides)
    n_obj = base["n_objects"]
    objs = rng.choice(np.arange(1, n_obj + 1), size=min(2, n_obj), replace=False)
    windows = []
    for k, o in enumerate(sorted(int(x) for x in objs)):
        lo = 40 + k * (n_frames // 2)
        hi = max(lo + 1, lo + n_frames // 2 - 60)
        start = int(rng.integers(lo, hi))
        start = min(start, n_frames - occlusion_len - 20)
        windows.append((o, start, start + occlusion_len - 1))
    base.setdefault("occlusion_windows", tuple(windows))
    return Scenario(**base)


def linear_toy(seed: int = 0, n_frames: int = 300, n_objects: int = 6, **overrides) -> Scenario:
    base = dict(
        name=f"linear-toy-{seed}",
        n_objects=n_objects,
        n_frames=n_frames,
        motion_kind="Linear",
        detection_noise_std=0.002,
        seed=seed,
    )
    base.update(overrides)
    return Scenario(**base)


# -- scenario files ----------------------------------------------------------

_TUPLE_FIELDS = {
    "speed": float,
    "size_range": float,
    "sin_amplitude": float,
    "sin_period": float,
    "shift_period": int,
    "confidence_range": float,
}


def _parse_windows(text: str) -> tuple[tuple[int, int, int], ...]:
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        obj, _, rng_ = part.partition(":")
        start, _, end = rng_.partition("-")
        out.append((int(obj), int(start), int(end)))
    return tuple(out)


def parse_scenario(text: str) -> Scenario:
    """Parse ``key = value`` lines; keys are the :class:`Scenario` field names.

    ``occlusion_windows`` is written as ``obj:start-end`` items separated by
    commas; range-valued fields take two comma-separated numbers. ``preset``
    (``dance-toy`` or ``linear-toy``) seeds the defaults.
    """
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        kv[key.strip()] = value.strip()
    preset = kv.pop("preset", None)
    fields_: dict = {}
    for key, value in kv.items():
        if key in ("name", "motion_kind"):
            fields_[key] = value
        elif key in ("n_objects", "n_frames", "seed"):
            fields_[key] = int(value)
        elif key == "detection_noise_std":
            fields_[key] = float(value)
        elif key == "occlusion_windows":
            fields_[key] = _parse_windows(value)
        elif key == "shape_shift":
            fields_[key] = value.lower() in ("1", "true", "yes")
        elif key in _TUPLE_FIELDS:
            a, b = (x.strip() for x in value.split(","))
            fields_[key] = (_TUPLE_FIELDS[key](a), _TUPLE_FIELDS[key](b))
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    if preset == "dance-toy":
        seed = fields_.pop("seed", 0)
        n_frames = fields_.pop("n_frames", 600)
        return dance_toy(seed, n_frames, **fields_)
    if preset == "linear-toy":
        seed = fields_.pop("seed", 0)
        return replace(linear_toy(seed), **fields_)
    if preset is not None:
        raise ValueError(f"unknown preset {preset!r}")
    return Scenario(**fields_)


def format_scenario(s: Scenario) -> str:
    lines = [
        f"name = {s.name}",
        f"n_objects = {s.n_objects}",
        f"n_frames = {s.n_frames}",
        f"motion_kind = {s.motion_kind}",
        "occlusion_windows = " + ", ".join(f"{o}:{a}-{b}" for o, a, b in s.occlusion_windows),
        f"detection_noise_std = {s.detection_noise_std!r}",
        f"seed = {s.seed}",
    ]
    for key in _TUPLE_FIELDS:
        a, b = getattr(s, key)
        lines.append(f"{key} = {a!r}, {b!r}")
    lines.append(f"shape_shift = {str(s.shape_shift).lower()}")
    return "\n".join(lines) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())
