"""Labelled TBR dataset construction from landmark-annotated face images.

Coordinates: landmarks and box corners use continuous image coordinates
where the image spans ``[0, W] x [0, H]``. Homographies act on pixel-centre
coordinates, so corners are shifted by half a pixel around each warp.
Normalized labels are ``x / W`` and ``y / H``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, DataError, DegenerateAnnotationError, ParseError
from .formats import Box, write_labels
from .geometry import MIRRORED, Border, Intrinsics, MotionConfig, sample_trajectory, warp_points
from .representation import TbrConfig, TbrFrame, single_frame_config, stream_encode
from .simulator import EventStream, FrameStream, SimConfig, simulate_sequence, stream_frames

__all__ = [
    "FACE",
    "EYE",
    "LandmarkSet",
    "BoxClassConfig",
    "AnnotationSet",
    "ManifestEntry",
    "Sample",
    "load_landmarks",
    "load_box_config",
    "landmarks_to_boxes",
    "project_annotations",
    "frame_for_span",
    "generate_sample",
    "to_uint8",
    "export_sample",
    "write_manifest",
    "read_manifest",
    "split_dataset",
    "stable_hash64",
    "sample_seed",
    "load_grayscale",
]

FACE = 0
EYE = 1


@dataclass
class LandmarkSet:
    image_id: str
    points: np.ndarray  # (n, 2) float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise DataError(f"{self.image_id}: no landmarks")
        if not np.all(np.isfinite(pts)):
            raise DataError(f"{self.image_id}: non-finite landmark")
        self.points = pts

    @property
    def count(self) -> int:
        return len(self.points)


def load_landmarks(path) -> LandmarkSet:
    """Read a Helen-style landmark file.

    The first line is the image identifier, each following non-blank line
    one ``x , y`` pair.
    """
    with open(path) as f:
        lines = f.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or not lines[0].strip():
        raise DataError(f"{path}: empty landmark file")
    image_id = lines[0].strip()
    pts = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'x , y', got {line!r}", line=n, path=path)
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"malformed coordinate in {line!r}", line=n, path=path) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"non-finite coordinate in {line!r}", line=n, path=path)
        pts.append((x, y))
    if not pts:
        raise DataError(f"{path}: no landmark points")
    return LandmarkSet(image_id, np.array(pts))


@dataclass(frozen=True)
class BoxClassConfig:
    """How face and eye boxes are derived from landmarks.

    Index ranges are half-open ``(start, stop)`` into the landmark list.
    Margins expand each side by that fraction of the box width/height.
    """

    eye_left_indices: tuple[int, int] = (134, 154)
    eye_right_indices: tuple[int, int] = (114, 134)
    face_margin: float = 0.10
    eye_margin: float = 0.25
    min_visible_fraction: float = 0.25

    def __post_init__(self):
        left = tuple(int(v) for v in self.eye_left_indices)
        right = tuple(int(v) for v in self.eye_right_indices)
        object.__setattr__(self, "eye_left_indices", left)
        object.__setattr__(self, "eye_right_indices", right)
        for name, r in (("eye_left_indices", left), ("eye_right_indices", right)):
            if len(r) != 2 or r[0] < 0:
                raise ConfigError(f"{name} must be a (start, stop) pair with start >= 0")
            if r[1] <= r[0]:
                raise ConfigError(f"{name} {r} is empty")
        if left[0] < right[1] and right[0] < left[1]:
            raise ConfigError(f"eye ranges {left} and {right} overlap")
        if self.face_margin < 0 or self.eye_margin < 0:
            raise ConfigError("margins must be non-negative")
        if not 0.0 <= self.min_visible_fraction <= 1.0:
            raise ConfigError("min_visible_fraction must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "eye_left_indices": list(self.eye_left_indices),
            "eye_right_indices": list(self.eye_right_indices),
            "face_margin": self.face_margin,
            "eye_margin": self.eye_margin,
            "min_visible_fraction": self.min_visible_fraction,
        }


def load_box_config(path=None) -> BoxClassConfig:
    """Load a box config JSON; ``None`` loads the shipped Helen defaults."""
    if path is None:
        text = resources.files("evface").joinpath("data/helen_boxes.json").read_text()
    else:
        text = Path(path).read_text()
    raw = {k: v for k, v in json.loads(text).items() if not k.startswith("_")}
    return BoxClassConfig(**raw)


@dataclass
class AnnotationSet:
    image_id: str
    boxes: list[Box] = field(default_factory=list)

    def __len__(self):
        return len(self.boxes)


def _normalize(cls, x0, y0, x1, y1, width, height) -> Box:
    x0, y0, x1, y1 = float(x0), float(y0), float(x1), float(y1)
    return Box(cls, (x0 + x1) / 2 / width, (y0 + y1) / 2 / height, (x1 - x0) / width, (y1 - y0) / height)


def _corners(box: Box, width, height):
    x0 = (box.cx - box.w / 2) * width
    x1 = (box.cx + box.w / 2) * width
    y0 = (box.cy - box.h / 2) * height
    y1 = (box.cy + box.h / 2) * height
    return x0, y0, x1, y1


def _landmark_box(pts, margin, width, height, what, image_id):
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    if x1 <= x0 or y1 <= y0:
        raise DegenerateAnnotationError(f"{image_id}: {what} landmarks span zero area")
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    x0, x1 = max(0.0, x0 - mx), min(float(width), x1 + mx)
    y0, y1 = max(0.0, y0 - my), min(float(height), y1 + my)
    if x1 <= x0 or y1 <= y0:
        raise DegenerateAnnotationError(f"{image_id}: {what} box lies outside the image")
    return x0, y0, x1, y1


def landmarks_to_boxes(lm: LandmarkSet, cfg: BoxClassConfig, dims) -> AnnotationSet:
    """Face box from all landmarks, one eye box per eye index range."""
    width, height = dims
    for name, (start, stop) in (
        ("eye_left_indices", cfg.eye_left_indices),
        ("eye_right_indices", cfg.eye_right_indices),
    ):
        if stop > lm.count:
            raise ConfigError(f"{name} ({start}, {stop}) exceeds {lm.count} landmarks")
    boxes = [_normalize(FACE, *_landmark_box(lm.points, cfg.face_margin, width, height, "face", lm.image_id), width, height)]
    for name, (start, stop) in (("left eye", cfg.eye_left_indices), ("right eye", cfg.eye_right_indices)):
        corners = _landmark_box(lm.points[start:stop], cfg.eye_margin, width, height, name, lm.image_id)
        boxes.append(_normalize(EYE, *corners, width, height))
    return AnnotationSet(lm.image_id, boxes)


def project_annotations(ann: AnnotationSet, h, dims, cfg: BoxClassConfig) -> AnnotationSet:
    """Carry boxes through a homography, clip to the frame, drop mostly-hidden ones."""
    width, height = dims
    out = []
    for box in ann.boxes:
        x0, y0, x1, y1 = _corners(box, width, height)
        corners = np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]) - 0.5
        mapped = warp_points(corners, h) + 0.5
        mx0, my0 = mapped.min(axis=0)
        mx1, my1 = mapped.max(axis=0)
        full = (mx1 - mx0) * (my1 - my0)
        cx0, cx1 = max(mx0, 0.0), min(mx1, float(width))
        cy0, cy1 = max(my0, 0.0), min(my1, float(height))
        if cx1 <= cx0 or cy1 <= cy0 or full <= 0:
            continue
        visible = (cx1 - cx0) * (cy1 - cy0)
        if visible < cfg.min_visible_fraction * full:
            continue
        nb = _normalize(box.cls, cx0, cy0, cx1, cy1, width, height)
        # a box that would serialize to zero size is useless as a label
        if nb.w < 1e-6 or nb.h < 1e-6:
            continue
        out.append(nb)
    return AnnotationSet(ann.image_id, out)


# -- per-sample generation ---------------------------------------------------


def stable_hash64(text: str) -> int:
    """64-bit BLAKE2b digest of the UTF-8 text, read as a little-endian integer."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def sample_seed(global_seed: int, image_id: str) -> int:
    return (int(global_seed) ^ stable_hash64(image_id)) & 0xFFFF_FFFF_FFFF_FFFF


def load_grayscale(path) -> np.ndarray:
    """Image file as a float grayscale array in [0, 1] (ITU-R 601 luma)."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def frame_for_span(fs: FrameStream, start: int, stop: int) -> int:
    """Index of the frame whose timestamp is closest to the middle of ``[start, stop)``."""
    mid = (start + stop) / 2
    ts = np.asarray(fs.timestamps, dtype=np.float64)
    return int(np.argmin(np.abs(ts - mid)))


@dataclass
class Sample:
    image_id: str
    seed: int
    frames: list[TbrFrame]
    annotations: list[AnnotationSet]
    events: EventStream
    stream: FrameStream


def generate_sample(
    image,
    landmarks: LandmarkSet,
    motion: MotionConfig,
    sim: SimConfig,
    box_cfg: BoxClassConfig,
    tbr: TbrConfig = TbrConfig(),
    single_frame: bool = True,
    plane_depth: float = 1.0,
    border: Border = MIRRORED,
    seed: int | None = None,
) -> Sample:
    """Simulate, encode and label one source image.

    In single-frame mode ``tbr.delta_t`` is replaced so the whole stream
    fits one frame of ``tbr.n_bits`` windows. Each TBR frame is labelled with
    the boxes projected through the homography of the video frame nearest
    the middle of its time span. ``seed`` replaces ``motion.seed`` when given.
    """
    img = np.asarray(image, dtype=np.float64)
    height, width = img.shape
    if seed is not None:
        motion = replace(motion, seed=seed)
    base = landmarks_to_boxes(landmarks, box_cfg, (width, height))
    poses = sample_trajectory(motion)
    fs = stream_frames(img, poses, Intrinsics.default(width, height), plane_depth, border, sim.fps)
    es = simulate_sequence(fs, sim)
    if single_frame:
        tbr = single_frame_config(es, tbr.n_bits, bit_order=tbr.bit_order, normalizer=tbr.normalizer)
    frames = stream_encode(es, tbr)
    span = tbr.delta_t * tbr.n_bits
    anns = []
    for f in frames:
        start = f.first_window_index * tbr.delta_t
        stop = max(min(start + span, es.span), start + 1)
        idx = frame_for_span(fs, start, stop)
        anns.append(project_annotations(base, fs.homographies[idx], (width, height), box_cfg))
    return Sample(landmarks.image_id, motion.seed, frames, anns, es, fs)


# -- export -----------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    sample_path: str
    label_path: str
    image_id: str
    seed: int

    @property
    def sample_id(self) -> str:
        """Key used to match predictions: the label file stem."""
        return Path(self.label_path).stem

    def to_line(self) -> str:
        return f"{self.sample_path}\t{self.label_path}\t{self.image_id}\t{self.seed}"


def to_uint8(values) -> np.ndarray:
    """Map [0, 1] values to bytes with round-half-up; out-of-range values saturate."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def export_sample(
    frames,
    annotations,
    out_dir,
    stem: str,
    resize: tuple[int, int] | None = None,
    seed: int = 0,
    image_id: str | None = None,
) -> list[ManifestEntry]:
    """Write each TBR frame as ``images/<stem>[_k].png`` and its labels to ``labels/``.

    Paths in the returned entries are relative to ``out_dir``. Labels are
    normalized, so resizing leaves them untouched.
    """
    if len(frames) != len(annotations):
        raise DataError(f"{len(frames)} frames but {len(annotations)} annotation sets")
    out_dir = Path(out_dir)
    try:
        (out_dir / "images").mkdir(parents=True, exist_ok=True)
        (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directories under {out_dir}: {exc}") from exc
    entries = []
    for k, (frame, ann) in enumerate(zip(frames, annotations)):
        name = stem if len(frames) == 1 else f"{stem}_{k:04d}"
        values = frame.values if isinstance(frame, TbrFrame) else np.asarray(frame)
        if resize is not None:
            rw, rh = resize
            values = np.asarray(
                Image.fromarray(values.astype(np.float32), mode="F").resize((rw, rh), Image.BILINEAR)
            )
        img_rel = f"images/{name}.png"
        lbl_rel = f"labels/{name}.txt"
        Image.fromarray(to_uint8(values), mode="L").save(out_dir / img_rel)
        write_labels(ann.boxes, out_dir / lbl_rel)
        entries.append(ManifestEntry(img_rel, lbl_rel, image_id or ann.image_id, int(seed)))
    return entries


def write_manifest(entries, path) -> None:
    paths = [e.sample_path for e in entries]
    if len(set(paths)) != len(paths):
        raise DataError("manifest sample paths are not unique")
    with open(path, "w", newline="\n") as f:
        f.writelines(e.to_line() + "\n" for e in entries)


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path) as f:
        for n, line in enumerate(f.read().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line=n, path=path)
            try:
                seed = int(parts[3])
            except ValueError:
                raise ParseError(f"bad seed {parts[3]!r}", line=n, path=path) from None
            entries.append(ManifestEntry(parts[0], parts[1], parts[2], seed))
    return entries


def split_dataset(manifest, ratio: float = 0.8, seed: int = 0):
    """Seeded shuffle split; ``round(ratio * n)`` entries go to train.

    Both halves keep the input order of their entries.
    """
    entries = list(manifest)
    if not entries:
        raise DataError("cannot split an empty manifest")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    n_train = int(math.floor(ratio * len(entries) + 0.5))
    rng = np.random.Generator(np.random.PCG64(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))
    chosen = set(rng.permutation(len(entries))[:n_train].tolist())
    train = [e for i, e in enumerate(entries) if i in chosen]
    val = [e for i, e in enumerate(entries) if i not in chosen]
    return train, val

