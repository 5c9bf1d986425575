"""Serialization: EVS1 binary event files, event CSV, label and prediction lines.

EVS1 layout (all little-endian, packed)::

    offset  size  field
    0       4     magic  b"EVS1"
    4       2     width  (uint16, >= 1)
    6       2     height (uint16, >= 1)
    8       8     count  (uint64)
    16      13*n  records: t uint64 µs | x uint16 | y uint16 | p uint8

Record ``i`` starts at byte ``16 + 13 * i``. Timestamps are absolute and
non-decreasing; the reader rejects anything else with a specific error.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    HeaderError,
    OutOfBoundsError,
    ParseError,
    PolarityError,
    RangeError,
    SerializationError,
    TimestampOrderError,
    TrailingBytesError,
    TruncatedError,
    UnknownClassError,
)
from .simulator import EVENT_DTYPE, EventStream

__all__ = [
    "MAGIC",
    "HEADER",
    "RECORD_SIZE",
    "CLASS_NAMES",
    "Box",
    "Detection",
    "write_events",
    "read_events",
    "read_header",
    "write_events_csv",
    "read_events_csv",
    "format_label_line",
    "write_labels",
    "read_labels",
    "format_prediction_line",
    "write_predictions",
    "read_predictions",
]

MAGIC = b"EVS1"
HEADER = struct.Struct("<4sHHQ")
RECORD_SIZE = EVENT_DTYPE.itemsize
assert HEADER.size == 16 and RECORD_SIZE == 13

CLASS_NAMES = {0: "face", 1: "eye"}


@dataclass(frozen=True)
class Box:
    """Labelled box: class id and normalized centre/size."""

    cls: int
    cx: float
    cy: float
    w: float
    h: float

    @property
    def xywh(self) -> tuple[float, float, float, float]:
        return self.cx, self.cy, self.w, self.h


@dataclass(frozen=True)
class Detection:
    image_id: str
    cls: int
    confidence: float
    cx: float
    cy: float
    w: float
    h: float

    @property
    def xywh(self) -> tuple[float, float, float, float]:
        return self.cx, self.cy, self.w, self.h


# -- binary ---------------------------------------------------------------


def _validate_records(ev, width, height, exc_sorted=TimestampOrderError):
    bad = np.flatnonzero((ev["x"] >= width) | (ev["y"] >= height))
    if bad.size:
        i = int(bad[0])
        raise OutOfBoundsError(
            f"record {i}: ({ev['x'][i]}, {ev['y'][i]}) outside {width}x{height}"
        )
    bad = np.flatnonzero(ev["p"] > 1)
    if bad.size:
        i = int(bad[0])
        raise PolarityError(f"record {i}: polarity {ev['p'][i]} not in {{0, 1}}")
    if len(ev) > 1:
        bad = np.flatnonzero(ev["t"][1:] < ev["t"][:-1])
        if bad.size:
            i = int(bad[0]) + 1
            raise exc_sorted(
                f"record {i}: timestamp {ev['t'][i]} < previous {ev['t'][i - 1]}"
            )


def write_events(stream: EventStream, sink) -> int:
    """Write ``stream`` as EVS1 to a path or binary file; returns bytes written."""
    width, height = stream.dims
    if not (1 <= width <= 0xFFFF and 1 <= height <= 0xFFFF):
        raise SerializationError(f"dims {width}x{height} do not fit EVS1")
    ev = np.ascontiguousarray(stream.events, dtype=EVENT_DTYPE)
    _validate_records(ev, width, height, exc_sorted=SerializationError)
    payload = HEADER.pack(MAGIC, width, height, len(ev)) + ev.tobytes()
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as f:
            f.write(payload)
    else:
        sink.write(payload)
    return len(payload)


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            return f.read()
    return source.read()


def read_header(data: bytes) -> tuple[int, int, int]:
    """Parse and check the 16-byte header; returns ``(width, height, count)``."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    if len(data) < HEADER.size:
        raise TruncatedError("header truncated", len(data))
    _, width, height, count = HEADER.unpack_from(data)
    if width < 1 or height < 1:
        raise HeaderError(f"invalid dims {width}x{height}")
    return width, height, count


def read_events(source) -> EventStream:
    """Read an EVS1 stream from a path, bytes or binary file.

    The returned stream's duration is the last timestamp + 1 (0 if empty),
    since EVS1 does not store a duration.
    """
    data = _read_bytes(source)
    width, height, count = read_header(data)
    body = len(data) - HEADER.size
    expected = RECORD_SIZE * count
    if body < expected:
        if body % RECORD_SIZE:
            offset = HEADER.size + (body // RECORD_SIZE) * RECORD_SIZE
            raise TruncatedError(f"record {body // RECORD_SIZE} truncated", offset)
        raise CountMismatchError(f"header declares {count} records, file holds {body // RECORD_SIZE}")
    if body > expected:
        raise TrailingBytesError(
            f"{body - expected} trailing bytes after {count} records "
            f"(offset {HEADER.size + expected})"
        )
    ev = np.frombuffer(data, dtype=EVENT_DTYPE, count=count, offset=HEADER.size).copy()
    _validate_records(ev, width, height)
    duration = int(ev["t"][-1]) + 1 if count else 0
    return EventStream(ev, width, height, duration)


# -- csv ------------------------------------------------------------------


def write_events_csv(stream: EventStream, sink) -> None:
    ev = stream.events
    lines = ["t,x,y,p"]
    lines += [f"{t},{x},{y},{p}" for t, x, y, p in zip(
        ev["t"].tolist(), ev["x"].tolist(), ev["y"].tolist(), ev["p"].tolist())]
    text = "\n".join(lines) + "\n"
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="\n") as f:
            f.write(text)
    else:
        sink.write(text)


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as f:
            return f.read()
    return source.read()


def read_events_csv(source, dims) -> EventStream:
    """Parse ``t,x,y,p`` CSV from a path or text file."""
    width, height = dims
    lines = _read_text(source).splitlines()
    if not lines or lines[0].strip() != "t,x,y,p":
        raise ParseError("missing header 't,x,y,p'", line=1)
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line=n)
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=n) from None
        if p not in (0, 1):
            raise PolarityError(f"line {n}: polarity {p} not in {{0, 1}}")
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBoundsError(f"line {n}: ({x}, {y}) outside {width}x{height}")
        if t < 0 or t >= 2**64:
            raise ParseError(f"timestamp {t} out of range", line=n)
        if rows and t < rows[-1][0]:
            raise TimestampOrderError(f"line {n}: timestamp {t} < previous {rows[-1][0]}")
        rows.append((t, x, y, p))
    ev = np.array(rows, dtype=EVENT_DTYPE) if rows else np.zeros(0, dtype=EVENT_DTYPE)
    duration = int(ev["t"][-1]) + 1 if len(ev) else 0
    return EventStream(ev, width, height, duration)


# -- labels and predictions -------------------------------------------------


def _parse_float(tok, n, path):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"malformed number {tok!r}", line=n, path=path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite number {tok!r}", line=n, path=path)
    return v


def _parse_class(tok, n, path):
    try:
        cls = int(tok)
    except ValueError:
        raise ParseError(f"malformed class id {tok!r}", line=n, path=path) from None
    if cls not in CLASS_NAMES:
        raise UnknownClassError(f"unknown class id {cls}", line=n, path=path)
    return cls


def _check_box(cx, cy, w, h, n, path):
    for name, v in (("cx", cx), ("cy", cy)):
        if not 0.0 <= v <= 1.0:
            raise RangeError(f"{name}={v} outside [0, 1]", line=n, path=path)
    for name, v in (("w", w), ("h", h)):
        if not 0.0 < v <= 1.0:
            raise RangeError(f"{name}={v} outside (0, 1]", line=n, path=path)


def format_label_line(box: Box) -> str:
    return f"{box.cls} {box.cx:.6f} {box.cy:.6f} {box.w:.6f} {box.h:.6f}"


def write_labels(boxes, sink) -> None:
    text = "".join(format_label_line(b) + "\n" for b in boxes)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="\n") as f:
            f.write(text)
    else:
        sink.write(text)


def _lines(source):
    path = source if isinstance(source, (str, os.PathLike)) else None
    if path is not None:
        with open(path) as f:
            return f.read().splitlines(), str(path)
    return source.read().splitlines(), None


def read_labels(source) -> list[Box]:
    """Parse ``class cx cy w h`` lines from a path or text file."""
    lines, path = _lines(source)
    out = []
    for n, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", line=n, path=path)
        cls = _parse_class(parts[0], n, path)
        cx, cy, w, h = (_parse_float(t, n, path) for t in parts[1:])
        _check_box(cx, cy, w, h, n, path)
        out.append(Box(cls, cx, cy, w, h))
    return out


def format_prediction_line(d: Detection) -> str:
    return (
        f"{d.image_id} {d.cls} {d.confidence:.6f} "
        f"{d.cx:.6f} {d.cy:.6f} {d.w:.6f} {d.h:.6f}"
    )


def write_predictions(dets, sink) -> None:
    text = "".join(format_prediction_line(d) + "\n" for d in dets)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="\n") as f:
            f.write(text)
    else:
        sink.write(text)


def read_predictions(source) -> list[Detection]:
    """Parse ``image_id class confidence cx cy w h`` lines."""
    lines, path = _lines(source)
    out = []
    for n, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 7:
            raise ParseError(f"expected 7 fields, got {len(parts)}", line=n, path=path)
        cls = _parse_class(parts[1], n, path)
        conf, cx, cy, w, h = (_parse_float(t, n, path) for t in parts[2:])
        if not 0.0 <= conf <= 1.0:
            raise RangeError(f"confidence={conf} outside [0, 1]", line=n, path=path)
        _check_box(cx, cy, w, h, n, path)
        out.append(Detection(parts[0], cls, conf, cx, cy, w, h))
    return out
