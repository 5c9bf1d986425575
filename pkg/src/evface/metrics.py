"""Detection evaluation: IoU matching, all-point AP, P/R/F1 and box MSE.

Boxes are ``(cx, cy, w, h)`` in normalized coordinates. Ground truth is a
mapping ``image_id -> list[Box]``; predictions are :class:`Detection`
records. Matching is greedy per image and class, in descending confidence
order, with ties broken by input order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import read_manifest
from .errors import ConfigError, DegenerateBoxError, EvaluationError
from .formats import CLASS_NAMES, Box, read_labels, read_predictions

__all__ = [
    "EvalConfig",
    "MatchResult",
    "MetricsReport",
    "iou",
    "match_detections",
    "average_precision",
    "evaluate",
    "load_ground_truth",
    "evaluate_files",
    "ROW_NAMES",
]


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    classes: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ConfigError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        unknown = [c for c in self.classes if c not in CLASS_NAMES]
        if unknown or not self.classes:
            raise ConfigError(f"classes must be a non-empty subset of {sorted(CLASS_NAMES)}")


def _xyxy(b):
    cx, cy, w, h = b
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def iou(a, b) -> float:
    """Intersection over union of two ``(cx, cy, w, h)`` boxes."""
    if a[2] <= 0 or a[3] <= 0 or b[2] <= 0 or b[3] <= 0:
        raise DegenerateBoxError(f"zero-area box in iou({tuple(a)}, {tuple(b)})")
    ax0, ay0, ax1, ay1 = _xyxy(a)
    bx0, by0, bx1, by1 = _xyxy(b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    # areas from the same corner arithmetic as the overlap, so identical boxes give exactly 1
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return min(1.0, inter / union)


def _as_boxes(gt):
    return gt.boxes if hasattr(gt, "boxes") else list(gt)


@dataclass
class MatchResult:
    """Outcome of greedy matching.

    ``assignment[i]`` is the ground-truth index claimed by prediction ``i``
    (in its image's box list), or ``None`` for a false positive.
    """

    assignment: list
    tp: int
    fp: int
    fn: int

    @property
    def is_tp(self) -> list[bool]:
        return [a is not None for a in self.assignment]


def _order(preds):
    # stable: equal confidences keep input order
    return sorted(range(len(preds)), key=lambda i: -preds[i].confidence)


def match_detections(preds, gts, cfg: EvalConfig = EvalConfig(), classes=None) -> MatchResult:
    classes = cfg.classes if classes is None else tuple(classes)
    preds = list(preds)
    claimed = {img: [False] * len(_as_boxes(g)) for img, g in gts.items()}
    assignment = [None] * len(preds)
    tp = fp = 0
    for i in _order(preds):
        d = preds[i]
        if d.cls not in classes:
            continue
        if d.image_id not in gts:
            raise EvaluationError(f"prediction for unknown image {d.image_id!r}")
        best, best_iou = None, cfg.iou_threshold
        for j, g in enumerate(_as_boxes(gts[d.image_id])):
            if g.cls != d.cls or claimed[d.image_id][j]:
                continue
            v = iou(d.xywh, g.xywh)
            if v >= best_iou and (best is None or v > best_iou):
                best, best_iou = j, v
        if best is None:
            fp += 1
        else:
            claimed[d.image_id][best] = True
            assignment[i] = best
            tp += 1
    n_gt = sum(1 for g in gts.values() for b in _as_boxes(g) if b.cls in classes)
    return MatchResult(assignment, tp, fp, n_gt - tp)


def average_precision(preds, gts, cls: int, cfg: EvalConfig = EvalConfig()) -> float | None:
    """All-point interpolated AP for one class; ``None`` when it has no ground truth."""
    n_gt = sum(1 for g in gts.values() for b in _as_boxes(g) if b.cls == cls)
    if n_gt == 0:
        return None
    preds = [d for d in preds if d.cls == cls]
    if not preds:
        return 0.0
    match = match_detections(preds, gts, cfg, classes=(cls,))
    order = _order(preds)
    hits = np.array([match.assignment[i] is not None for i in order], dtype=np.float64)
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    recall = tp / n_gt
    precision = tp / (tp + fp)

    r = np.concatenate([[0.0], recall])
    p = np.concatenate([[0.0], precision])
    # monotone envelope, right to left
    p = np.maximum.accumulate(p[::-1])[::-1]
    steps = np.flatnonzero(r[1:] != r[:-1])
    return float(np.sum((r[steps + 1] - r[steps]) * p[steps + 1]))


ROW_NAMES = {
    "map_all": "Mean Average Precision (All)",
    "map_face": "Mean Average Precision (Face)",
    "map_eye": "Mean Average Precision (Eye)",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1-Score",
    "box_mse": "Mean Squared Error",
}


@dataclass
class MetricsReport:
    ap: dict = field(default_factory=dict)
    map_all: float | None = None
    map_face: float | None = None
    map_eye: float | None = None
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    box_mse: float | None = None
    tp: int = 0
    fp: int = 0
    fn: int = 0
    zero_tp: bool = False

    def as_dict(self) -> dict:
        return {
            "map_all": self.map_all,
            "map_face": self.map_face,
            "map_eye": self.map_eye,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "box_mse": self.box_mse,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "zero_tp": self.zero_tp,
            "ap": {CLASS_NAMES[c]: v for c, v in sorted(self.ap.items())},
        }

    def to_text(self) -> str:
        """Key-value report using the usual table row names."""
        lines = []
        for key, name in ROW_NAMES.items():
            v = getattr(self, key)
            lines.append(f"{name}: {'n/a' if v is None else f'{v:.6f}'}")
        lines.append(f"TP: {self.tp}")
        lines.append(f"FP: {self.fp}")
        lines.append(f"FN: {self.fn}")
        if self.zero_tp:
            lines.append("note: no true positives")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        """Tab-separated ``metric<TAB>value`` table with a header row."""
        rows = ["metric\tvalue"]
        for key, v in self.as_dict().items():
            if key == "ap":
                rows += [f"ap_{name}\t{_fmt(val)}" for name, val in v.items()]
            else:
                rows.append(f"{key}\t{_fmt(v)}")
        return "\n".join(rows) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return f"{v:.6f}"


def evaluate(preds, gts, cfg: EvalConfig = EvalConfig()) -> MetricsReport:
    preds = list(preds)
    missing = sorted({d.image_id for d in preds} - set(gts))
    if missing:
        raise EvaluationError("predictions reference images without ground truth: " + ", ".join(missing))
    preds = [d for d in preds if d.cls in cfg.classes]

    ap = {c: average_precision(preds, gts, c, cfg) for c in cfg.classes}
    defined = [v for v in ap.values() if v is not None]
    match = match_detections(preds, gts, cfg)

    sq = []
    for d, j in zip(preds, match.assignment):
        if j is not None:
            g = _as_boxes(gts[d.image_id])[j]
            sq.append(math.fsum((p - q) ** 2 for p, q in zip(d.xywh, g.xywh)) / 4)

    tp, fp, fn = match.tp, match.fp, match.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(
        ap=ap,
        map_all=float(np.mean(defined)) if defined else None,
        map_face=ap.get(0),
        map_eye=ap.get(1),
        precision=precision,
        recall=recall,
        f1=f1,
        # fsum is exactly rounded, so the result does not depend on prediction order
        box_mse=math.fsum(sq) / len(sq) if sq else None,
        tp=tp,
        fp=fp,
        fn=fn,
        zero_tp=tp == 0,
    )


def load_ground_truth(dataset_dir, split: str | None = None) -> dict[str, list[Box]]:
    """Ground truth keyed by sample id (label file stem) from a dataset directory.

    ``split`` selects ``train.tsv``/``val.tsv`` instead of ``manifest.tsv``.
    """
    root = Path(dataset_dir)
    manifest = root / ("manifest.tsv" if split in (None, "all") else f"{split}.tsv")
    if not manifest.exists():
        raise EvaluationError(f"no manifest at {manifest}")
    gts = {}
    for e in read_manifest(manifest):
        label = root / e.label_path
        if not label.exists():
            raise EvaluationError(f"missing label file {label}")
        gts[e.sample_id] = read_labels(label)
    return gts


def evaluate_files(pred_path, dataset_dir, cfg: EvalConfig = EvalConfig(), split=None) -> MetricsReport:
    return evaluate(read_predictions(pred_path), load_ground_truth(dataset_dir, split), cfg)

