"""Frame stream to DVS events with a linear-in-log contrast threshold model.

Between two frames each pixel's log intensity is interpolated linearly in
time. Every time it moves one contrast threshold away from the pixel's
reference level an event is emitted and the reference steps by that
threshold. There is no noise model.

Events are held in numpy structured arrays of :data:`EVENT_DTYPE`, whose
packed 13-byte layout is also the EVS1 record layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError, StateError
from .geometry import MIRRORED, Border, CameraPose, Intrinsics, pose_to_homography, warp_image

__all__ = [
    "EVENT_DTYPE",
    "Event",
    "EventStream",
    "SimConfig",
    "PixelState",
    "FrameStream",
    "frame_timestamps",
    "round_half_away",
    "to_unit_intensity",
    "stream_frames",
    "simulate_events",
    "simulate_sequence",
    "make_events",
]

EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])

# sentinel "no event yet" timestamp
_NEVER = np.iinfo(np.int64).min // 2


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


def make_events(events=(), *, t=None, x=None, y=None, p=None) -> np.ndarray:
    """Build an :data:`EVENT_DTYPE` array from Event tuples or column arrays."""
    if t is not None:
        out = np.zeros(len(t), dtype=EVENT_DTYPE)
        out["t"], out["x"], out["y"], out["p"] = t, x, y, p
        return out
    events = list(events)
    out = np.zeros(len(events), dtype=EVENT_DTYPE)
    for i, e in enumerate(events):
        e = Event(*e)
        out[i] = (e.t, e.x, e.y, e.p)
    return out


@dataclass
class EventStream:
    """Time-sorted events plus sensor dims and stream duration in µs."""

    events: np.ndarray
    width: int
    height: int
    duration: int = 0

    def __post_init__(self):
        ev = np.asarray(self.events)
        if ev.dtype != EVENT_DTYPE:
            ev = ev.astype(EVENT_DTYPE)
        self.events = ev
        if self.width < 1 or self.height < 1:
            raise DataError(f"bad stream dims {self.width}x{self.height}")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        for rec in self.events:
            yield Event(int(rec["x"]), int(rec["y"]), int(rec["t"]), int(rec["p"]))

    def __eq__(self, other):
        # duration is not part of the wire format and is ignored here
        if not isinstance(other, EventStream):
            return NotImplemented
        return self.dims == other.dims and self.events.tobytes() == other.events.tobytes()

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def span(self) -> int:
        """Time extent covering ``duration`` and every event, i.e. ``[0, span)``."""
        last = int(self.events["t"][-1]) + 1 if len(self.events) else 0
        return max(int(self.duration), last)


@dataclass(frozen=True)
class SimConfig:
    contrast_threshold_pos: float = 0.15
    contrast_threshold_neg: float = 0.15
    log_eps: float = 1e-3
    refractory_us: int = 0
    fps: float = 30.0

    def __post_init__(self):
        if not (self.contrast_threshold_pos > 0 and self.contrast_threshold_neg > 0):
            raise ConfigError("contrast thresholds must be positive")
        if not self.log_eps > 0:
            raise ConfigError("log_eps must be positive")
        if self.refractory_us < 0:
            raise ConfigError("refractory_us must be non-negative")
        if not self.fps > 0:
            raise ConfigError("fps must be positive")


@dataclass
class PixelState:
    """Per-pixel reference log intensity and last emitted event time."""

    reference: np.ndarray
    last_event: np.ndarray

    @classmethod
    def from_frame(cls, frame, cfg: SimConfig) -> PixelState:
        ref = _log(np.asarray(frame, dtype=np.float64), cfg.log_eps)
        return cls(ref, np.full(ref.shape, _NEVER, dtype=np.int64))

    @property
    def shape(self):
        return self.reference.shape


@dataclass
class FrameStream:
    frames: list
    timestamps: list
    homographies: list
    fps: float = 30.0

    def __post_init__(self):
        if not self.frames:
            raise ConfigError("empty frame stream")
        if not (len(self.frames) == len(self.timestamps) == len(self.homographies)):
            raise ConfigError("frames, timestamps and homographies differ in length")
        shape = np.shape(self.frames[0])
        if any(np.shape(f) != shape for f in self.frames):
            raise ConfigError("frames differ in dims")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ConfigError("frame timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @property
    def dims(self) -> tuple[int, int]:
        h, w = np.shape(self.frames[0])
        return w, h


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    if np.isscalar(x):
        return int(math.copysign(math.floor(abs(x) + 0.5), x))
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def frame_timestamps(n: int, fps: float) -> list[int]:
    return [round_half_away(i * 1e6 / fps) for i in range(n)]


def to_unit_intensity(image) -> np.ndarray:
    """Grayscale float image in [0, 1]; integer images are scaled by their dtype max."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise DataError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if np.issubdtype(img.dtype, np.integer):
        return img.astype(np.float64) / np.iinfo(img.dtype).max
    return img.astype(np.float64)


def _log(img, eps):
    return np.log(np.maximum(img, eps))


def stream_frames(
    image,
    poses: Sequence[CameraPose],
    k: Intrinsics | None = None,
    plane_depth: float = 1.0,
    border: Border = MIRRORED,
    fps: float = 30.0,
) -> FrameStream:
    """Render the source image as seen from each pose."""
    img = to_unit_intensity(image)
    if len(poses) == 0:
        raise ConfigError("pose list is empty")
    if not fps > 0:
        raise ConfigError("fps must be positive")
    if k is None:
        k = Intrinsics.default(img.shape[1], img.shape[0])
    frames, homs = [], []
    for pose in poses:
        h = pose_to_homography(pose, k, plane_depth)
        frames.append(warp_image(img, h, border))
        homs.append(h)
    return FrameStream(frames, frame_timestamps(len(poses), fps), homs, fps)


def simulate_events(prev, next, t0: int, t1: int, cfg: SimConfig, state: PixelState) -> np.ndarray:
    """Events for one frame interval; ``state`` is updated in place.

    Returns an :data:`EVENT_DTYPE` array sorted by ``(t, y, x)``.
    """
    t0, t1 = int(t0), int(t1)
    if t1 <= t0:
        raise ConfigError(f"t1 ({t1}) must exceed t0 ({t0})")
    prev = np.asarray(prev, dtype=np.float64)
    next = np.asarray(next, dtype=np.float64)
    if prev.shape != state.shape or next.shape != state.shape:
        raise StateError(
            f"frame dims {prev.shape}/{next.shape} do not match state {state.shape}"
        )

    l0 = _log(prev, cfg.log_eps)
    l1 = _log(next, cfg.log_eps)
    ref = state.reference
    c_pos, c_neg = cfg.contrast_threshold_pos, cfg.contrast_threshold_neg

    n_pos = np.floor((l1 - ref) / c_pos + 1e-9).astype(np.int64)
    n_neg = np.floor((ref - l1) / c_neg + 1e-9).astype(np.int64)
    np.maximum(n_pos, 0, out=n_pos)
    np.maximum(n_neg, 0, out=n_neg)
    counts = n_pos + n_neg  # at most one is non-zero per pixel
    if not counts.any():
        return np.zeros(0, dtype=EVENT_DTYPE)

    flat = np.flatnonzero(counts)
    reps = counts.ravel()[flat]
    pix = np.repeat(flat, reps)
    # 1-based crossing index within each pixel
    starts = np.cumsum(reps) - reps
    kk = np.arange(pix.size) - np.repeat(starts, reps) + 1

    positive = n_pos.ravel()[pix] > 0
    step = np.where(positive, c_pos, -c_neg)
    level = ref.ravel()[pix] + kk * step
    a = l0.ravel()[pix]
    b = l1.ravel()[pix]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(b != a, (level - a) / (b - a), 1.0)
    frac = np.clip(frac, 0.0, 1.0)
    t = round_half_away(t0 + frac * (t1 - t0))

    ref_flat = ref.reshape(-1)
    ref_flat[flat] += np.where(n_pos.ravel()[flat] > 0, n_pos.ravel()[flat] * c_pos,
                               -n_neg.ravel()[flat] * c_neg)

    keep = _refractory_filter(pix, t, state.last_event.reshape(-1), cfg.refractory_us)
    pix, t, positive = pix[keep], t[keep], positive[keep]

    height, width = state.shape
    ys, xs = np.divmod(pix, width)
    order = np.lexsort((xs, ys, t))
    return make_events(t=t[order], x=xs[order], y=ys[order], p=positive[order].astype(np.uint8))


def _refractory_filter(pix, t, last_event, refractory_us):
    """Drop events closer than ``refractory_us`` to the pixel's previous event.

    Candidates arrive grouped by pixel with ascending times. ``last_event`` is
    updated in place with each pixel's latest emitted time.
    """
    if refractory_us <= 0:
        # every candidate is emitted; last time per pixel is the group maximum
        np.maximum.at(last_event, pix, t)
        return np.ones(pix.size, dtype=bool)
    keep = np.zeros(pix.size, dtype=bool)
    for i in range(pix.size):
        p = pix[i]
        if t[i] - last_event[p] >= refractory_us:
            keep[i] = True
            last_event[p] = t[i]
    return keep


def simulate_sequence(fs: FrameStream, cfg: SimConfig) -> EventStream:
    """Run :func:`simulate_events` over consecutive frame pairs.

    The duration is the timestamp of the final frame.
    """
    state = PixelState.from_frame(fs.frames[0], cfg)
    batches = [
        simulate_events(fs.frames[i], fs.frames[i + 1], fs.timestamps[i], fs.timestamps[i + 1], cfg, state)
        for i in range(len(fs) - 1)
    ]
    events = np.concatenate(batches) if batches else np.zeros(0, dtype=EVENT_DTYPE)
    # batches can share a boundary timestamp
    events = events[np.lexsort((events["x"], events["y"], events["t"]))]
    width, height = fs.dims
    return EventStream(events, width, height, duration=int(fs.timestamps[-1]))
