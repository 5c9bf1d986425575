"""Pipeline configuration: one JSON document aggregating every stage's settings."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import BoxClassConfig, load_box_config
from .errors import ConfigError
from .geometry import Border, MotionConfig
from .metrics import EvalConfig
from .representation import TbrConfig
from .simulator import SimConfig

__all__ = ["PipelineConfig", "DEFAULTS", "parse_override"]


DEFAULTS = {
    "seed": 42,
    "jobs": 1,
    "plane_depth": 1.0,
    "border": "mirrored",
    "border_value": 0.0,
    "single_frame": True,
    "resize": None,
    "split_ratio": 0.8,
    "motion": {
        "pause_probability": 0.5,
        "max_frames": 100,
        "step_std": list(MotionConfig().step_std),
        "amplitude_clamp": list(MotionConfig().amplitude_clamp),
    },
    "sim": {
        "contrast_threshold_pos": 0.15,
        "contrast_threshold_neg": 0.15,
        "log_eps": 1e-3,
        "refractory_us": 0,
        "fps": 30.0,
    },
    "tbr": {
        "n_bits": 8,
        "delta_t": 10000,
        "bit_order": "earliest_msb",
        "normalizer": "max_code",
    },
    "boxes": BoxClassConfig().to_dict(),
    "eval": {"iou_threshold": 0.5, "classes": [0, 1]},
}


def _merge(base, update, path=""):
    for key, value in update.items():
        if key.startswith("_"):
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be an object")
            _merge(base[key], value, path + key + ".")
        else:
            base[key] = value
    return base


def parse_override(text: str) -> dict:
    """``"motion.max_frames=20"`` -> ``{"motion": {"max_frames": 20}}``.

    The value is parsed as JSON when possible, otherwise kept as a string.
    """
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = cur = {}
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out


@dataclass
class PipelineConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        # build every sub-config once so bad values fail early
        self.motion, self.sim, self.tbr, self.boxes, self.eval, self.border
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        r = self.raw["resize"]
        if r is not None and (not isinstance(r, (list, tuple)) or len(r) != 2 or min(r) < 1):
            raise ConfigError("resize must be [width, height] with positive values")

    @classmethod
    def load(cls, path=None, overrides=()) -> PipelineConfig:
        raw = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                user = json.loads(Path(path).read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
            if "boxes_file" in user:
                user["boxes"] = load_box_config(Path(path).parent / user.pop("boxes_file")).to_dict()
            _merge(raw, user)
        for o in overrides:
            _merge(raw, o)
        return cls(raw)

    def dump(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def jobs(self) -> int:
        return int(self.raw["jobs"])

    @property
    def plane_depth(self) -> float:
        return float(self.raw["plane_depth"])

    @property
    def single_frame(self) -> bool:
        return bool(self.raw["single_frame"])

    @property
    def resize(self):
        r = self.raw["resize"]
        return None if r is None else (int(r[0]), int(r[1]))

    @property
    def split_ratio(self) -> float:
        return float(self.raw["split_ratio"])

    @property
    def motion(self) -> MotionConfig:
        m = self.raw["motion"]
        return MotionConfig(m["pause_probability"], m["max_frames"], tuple(m["step_std"]),
                            tuple(m["amplitude_clamp"]), seed=int(self.raw["seed"]) & (2**64 - 1))

    @property
    def sim(self) -> SimConfig:
        return SimConfig(**self.raw["sim"])

    @property
    def tbr(self) -> TbrConfig:
        return TbrConfig(**self.raw["tbr"])

    @property
    def boxes(self) -> BoxClassConfig:
        return BoxClassConfig(**self.raw["boxes"])

    @property
    def eval(self) -> EvalConfig:
        e = self.raw["eval"]
        return EvalConfig(e["iou_threshold"], tuple(e["classes"]))

    @property
    def border(self) -> Border:
        if self.raw["border"] == "constant":
            return Border.constant(self.raw["border_value"])
        return Border(self.raw["border"])

    def as_dict(self) -> dict:
        return copy.deepcopy(self.raw)

