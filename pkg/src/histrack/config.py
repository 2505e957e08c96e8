"""Configuration profiles and the flat ``key = value`` profile file format.

Keys are dotted (``model.d``, ``train.lr``, ``assoc.iou_threshold``). Blank
lines and ``#`` comments are ignored. A file may start from a named profile
with ``profile = toy``; later keys override it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .association import COST_PROFILES
from .kalman import KalmanConfig
from .model import EncoderConfig
from .tracker import AssocConfig, LifecycleConfig
from .training import TrainConfig

PREDICTORS = ("transformer", "kalman")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigProfile:
    name: str = "paper"
    model: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    assoc: AssocConfig = field(default_factory=AssocConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    predictor: str = "transformer"

    def __post_init__(self):
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"predictor must be one of {PREDICTORS}, got {self.predictor!r}")

    @property
    def T(self) -> int:
        return self.model.history_len


PAPER = ConfigProfile(
    "paper",
    model=EncoderConfig(n_layers=6, n_heads=8, d_model=512, history_len=30),
    train=TrainConfig(lr=1e-4, epochs=50, batch_size=512, mask_prob=0.1),
)

# CI scale: a small encoder that trains on one core in minutes. The lower
# spatial scale and the cosine-decayed larger step are what let it fit
# sub-percent box offsets within 20 epochs.
TOY = ConfigProfile(
    "toy",
    model=EncoderConfig(n_layers=2, n_heads=4, d_model=64, history_len=10, spatial_scale=3.0),
    train=TrainConfig(lr=2e-3, epochs=20, batch_size=64, mask_prob=0.1, lr_schedule="cosine"),
)

PROFILES = {"paper": PAPER, "toy": TOY}


def get_profile(name: str) -> ConfigProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "off") else float(text)


# dotted key -> (section, field, parser)
_KEYS: dict[str, tuple[str, str, Callable[[str], object]]] = {
    "model.d": ("model", "d_model", int),
    "model.layers": ("model", "n_layers", int),
    "model.heads": ("model", "n_heads", int),
    "model.ffn_dim": ("model", "ffn_dim", int),
    "model.head_hidden": ("model", "head_hidden", int),
    "model.T": ("model", "history_len", int),
    "model.scale": ("model", "spatial_scale", float),
    "train.lr": ("train", "lr", float),
    "train.epochs": ("train", "epochs", int),
    "train.batch_size": ("train", "batch_size", int),
    "train.p": ("train", "mask_prob", float),
    "train.seed": ("train", "seed", int),
    "train.clip_norm": ("train", "clip_norm", _opt_float),
    "train.val_fraction": ("train", "val_fraction", float),
    "train.lr_schedule": ("train", "lr_schedule", str),
    "assoc.iou_threshold": ("assoc", "iou_threshold", float),
    "assoc.dtheta_k": ("assoc", "dtheta_k", int),
    "assoc.w_iou": ("assoc.weights", "iou", float),
    "assoc.w_l1": ("assoc.weights", "l1", float),
    "assoc.w_dtheta": ("assoc.weights", "dtheta", float),
    "lifecycle.min_hits": ("lifecycle", "min_hits", int),
    "lifecycle.max_age": ("lifecycle", "max_age", int),
    "lifecycle.min_confidence": ("lifecycle", "min_confidence", float),
    "lifecycle.unmatched_update": ("lifecycle", "unmatched_update", str),
    "kalman.init_pos_std": ("kalman", "init_pos_std", float),
    "kalman.init_vel_std": ("kalman", "init_vel_std", float),
    "kalman.q_pos": ("kalman", "q_pos", float),
    "kalman.q_vel": ("kalman", "q_vel", float),
    "kalman.r": ("kalman", "r", float),
}

KNOWN_KEYS = tuple(_KEYS) + ("name", "predictor", "assoc.cost_profile")


def with_cost_profile(profile: ConfigProfile, cost_profile: str) -> ConfigProfile:
    if cost_profile not in COST_PROFILES:
        raise ConfigError(f"unknown cost profile {cost_profile!r}; choose from {sorted(COST_PROFILES)}")
    return replace(profile, assoc=replace(profile.assoc, weights=COST_PROFILES[cost_profile]))


def apply_overrides(profile: ConfigProfile, items: list[tuple[str, str]], where: str = "") -> ConfigProfile:
    """Apply dotted ``(key, value)`` pairs in order; every component re-validates."""
    prefix = f"{where}: " if where else ""
    # collect per-section changes first so coupled fields validate together
    sections: dict[str, dict[str, object]] = {}
    top: dict[str, object] = {}
    for key, raw in items:
        try:
            if key == "name":
                top["name"] = raw.strip()
            elif key == "predictor":
                top["predictor"] = raw.strip()
            elif key == "assoc.cost_profile":
                name = raw.strip()
                if name not in COST_PROFILES:
                    raise ConfigError(f"unknown cost profile {name!r}")
                sections.setdefault("assoc", {})["weights"] = COST_PROFILES[name]
                sections.pop("assoc.weights", None)
            elif key in _KEYS:
                section, fname, parse = _KEYS[key]
                sections.setdefault(section, {})[fname] = parse(raw.strip())
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"{prefix}{exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{prefix}bad value for {key!r}: {exc}") from None
    try:
        if "assoc.weights" in sections:
            base = sections.get("assoc", {}).get("weights", profile.assoc.weights)
            sections.setdefault("assoc", {})["weights"] = replace(base, **sections.pop("assoc.weights"))
        m = sections.get("model", {})
        if "d_model" in m:
            # derived widths follow a changed d_model unless given explicitly
            m.setdefault("ffn_dim", 0)
            m.setdefault("head_hidden", 0)
        changes = {name: replace(getattr(profile, name), **vals) for name, vals in sections.items()}
        return replace(profile, **changes, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}{exc}") from None


def parse_profile_text(text: str, base: ConfigProfile | None = None, where: str = "") -> ConfigProfile:
    items: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = stripped.split("=", 1)
        items.append((key.strip(), value.strip()))
    if items and items[0][0] == "profile":
        base = get_profile(items.pop(0)[1])
    if any(k == "profile" for k, _ in items):
        raise ConfigError(f"{where}: 'profile' may only appear as the first key")
    return apply_overrides(base or PAPER, items, where)


def load_profile(name_or_path: str) -> ConfigProfile:
    """A built-in profile name, or a path to a profile file."""
    if name_or_path in PROFILES:
        return PROFILES[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"no profile named {name_or_path!r} and no such file")
    return parse_profile_text(path.read_text(), where=str(path))


def format_profile(p: ConfigProfile) -> str:
    """Inverse of :func:`parse_profile_text` for every settable key."""
    lines = [f"name = {p.name}", f"predictor = {p.predictor}"]
    for key, (section, fname, _) in _KEYS.items():
        obj = p
        for part in section.split("."):
            obj = getattr(obj, part)
        value = getattr(obj, fname)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
