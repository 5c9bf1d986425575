"""Temporal Binary Representation (TBR).

Events are binarized per accumulation window (one bit per pixel: did any
event fire?). ``N`` consecutive window bitmaps are read as an N-bit code per
pixel and stored as a single frame of ``code / D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, CorruptionError, DataError
from .simulator import EVENT_DTYPE, EventStream

__all__ = [
    "TbrConfig",
    "BinaryFrame",
    "TbrFrame",
    "binarize_window",
    "encode_tbr",
    "decode_tbr",
    "window_count",
    "frame_count",
    "single_frame_config",
    "stream_encode",
]

BIT_ORDERS = ("earliest_msb", "latest_msb")
NORMALIZERS = ("max_code", "window_count")


@dataclass(frozen=True)
class TbrConfig:
    delta_t: int = 10_000
    n_bits: int = 8
    bit_order: str = "earliest_msb"
    normalizer: str = "max_code"

    def __post_init__(self):
        if int(self.delta_t) != self.delta_t or self.delta_t < 1:
            raise ConfigError(f"delta_t must be an integer >= 1 µs, got {self.delta_t}")
        if int(self.n_bits) != self.n_bits or not 1 <= self.n_bits <= 32:
            raise ConfigError(f"n_bits must be in [1, 32], got {self.n_bits}")
        if self.bit_order not in BIT_ORDERS:
            raise ConfigError(f"bit_order must be one of {BIT_ORDERS}")
        if self.normalizer not in NORMALIZERS:
            raise ConfigError(f"normalizer must be one of {NORMALIZERS}")

    @property
    def denominator(self) -> int:
        if self.normalizer == "max_code":
            return (1 << self.n_bits) - 1
        return self.n_bits

    def weight(self, i: int) -> int:
        """Code weight of the ``i``-th window (0 = earliest) inside a group."""
        shift = self.n_bits - 1 - i if self.bit_order == "earliest_msb" else i
        return 1 << shift


@dataclass
class BinaryFrame:
    bits: np.ndarray  # (height, width) uint8 of 0/1
    window_index: int = 0

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise DataError("binary frame must be 2-D")
        if not ((b == 0) | (b == 1)).all():
            raise DataError("binary frame values must be 0 or 1")
        self.bits = b.astype(np.uint8)

    @property
    def dims(self) -> tuple[int, int]:
        return self.bits.shape[1], self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinaryFrame):
            return NotImplemented
        return self.window_index == other.window_index and np.array_equal(self.bits, other.bits)


@dataclass
class TbrFrame:
    values: np.ndarray  # (height, width) float64 on the {k / D} grid
    first_window_index: int
    n_bits: int

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[0]


def binarize_window(events: np.ndarray, window_start: int, cfg: TbrConfig, dims) -> BinaryFrame:
    """Presence bitmap of events with ``window_start <= t < window_start + delta_t``.

    The returned window index is ``window_start // delta_t``.
    """
    width, height = dims
    ev = np.asarray(events, dtype=EVENT_DTYPE)
    t = ev["t"].astype(np.int64)
    sel = ev[(t >= window_start) & (t < window_start + cfg.delta_t)]
    _check_bounds(sel, width, height)
    bits = np.zeros((height, width), dtype=np.uint8)
    bits[sel["y"], sel["x"]] = 1
    return BinaryFrame(bits, window_start // cfg.delta_t)


def _check_bounds(ev, width, height):
    bad = np.flatnonzero((ev["x"] >= width) | (ev["y"] >= height))
    if bad.size:
        e = ev[bad[0]]
        raise DataError(
            f"event (x={e['x']}, y={e['y']}, t={e['t']}, p={e['p']}) outside {width}x{height}"
        )


def encode_tbr(frames: Sequence[BinaryFrame], cfg: TbrConfig) -> TbrFrame:
    if len(frames) != cfg.n_bits:
        raise ConfigError(f"expected {cfg.n_bits} binary frames, got {len(frames)}")
    shape = frames[0].bits.shape
    if any(f.bits.shape != shape for f in frames):
        raise ConfigError("binary frames differ in dims")
    first = frames[0].window_index
    if any(f.window_index != first + i for i, f in enumerate(frames)):
        raise ConfigError("binary frames must have consecutive window indices")

    code = np.zeros(shape, dtype=np.uint64)
    for i, f in enumerate(frames):
        code |= f.bits.astype(np.uint64) * np.uint64(cfg.weight(i))
    return TbrFrame(code.astype(np.float64) / cfg.denominator, first, cfg.n_bits)


def _codes(frame: TbrFrame, cfg: TbrConfig) -> np.ndarray:
    if frame.n_bits != cfg.n_bits:
        raise ConfigError(f"frame has {frame.n_bits} bits, config {cfg.n_bits}")
    scaled = np.asarray(frame.values, dtype=np.float64) * cfg.denominator
    code = np.rint(scaled)
    off_grid = ~np.isfinite(scaled) | (np.abs(scaled - code) > 1e-6) | (code < 0)
    off_grid |= code > (1 << cfg.n_bits) - 1
    if off_grid.any():
        y, x = np.argwhere(off_grid)[0]
        raise CorruptionError(
            f"value {frame.values[y, x]!r} at (x={x}, y={y}) is not a representable "
            f"{cfg.n_bits}-bit code / {cfg.denominator}"
        )
    return code.astype(np.uint64)


def decode_tbr(frame: TbrFrame, cfg: TbrConfig) -> list[BinaryFrame]:
    code = _codes(frame, cfg)
    return [
        BinaryFrame(((code & np.uint64(cfg.weight(i))) != 0).astype(np.uint8),
                    frame.first_window_index + i)
        for i in range(cfg.n_bits)
    ]


def window_count(span: int, delta_t: int) -> int:
    """Windows needed to tile ``[0, span)``; at least one."""
    return max(1, math.ceil(span / delta_t))


def frame_count(windows: int, n_bits: int) -> int:
    return math.ceil(windows / n_bits)


def single_frame_config(es: EventStream, n_bits: int = 8, **kw) -> TbrConfig:
    """Config whose ``delta_t`` makes :func:`stream_encode` emit exactly one frame."""
    return TbrConfig(delta_t=max(1, math.ceil(es.span / n_bits)), n_bits=n_bits, **kw)


def stream_encode(es: EventStream, cfg: TbrConfig) -> list[TbrFrame]:
    """Encode a whole stream into ``ceil(W / N)`` TBR frames.

    ``W`` windows of ``delta_t`` tile ``[0, es.span)``; the last group of
    ``N`` windows is padded with empty windows.
    """
    width, height = es.dims
    ev = es.events
    if len(ev) > 1 and np.any(np.diff(ev["t"].astype(np.int64)) < 0):
        raise DataError("event stream is not time-sorted")
    _check_bounds(ev, width, height)

    n_windows = window_count(es.span, cfg.delta_t)
    n_frames = frame_count(n_windows, cfg.n_bits)
    w = ev["t"].astype(np.int64) // cfg.delta_t
    group, pos = np.divmod(w, cfg.n_bits)
    weights = np.array([cfg.weight(i) for i in range(cfg.n_bits)], dtype=np.uint64)

    codes = np.zeros((n_frames, height, width), dtype=np.uint64)
    np.bitwise_or.at(codes, (group, ev["y"].astype(np.intp), ev["x"].astype(np.intp)), weights[pos])
    return [
        TbrFrame(codes[g].astype(np.float64) / cfg.denominator, g * cfg.n_bits, cfg.n_bits)
        for g in range(n_frames)
    ]
