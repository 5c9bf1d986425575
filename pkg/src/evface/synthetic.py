"""Toy face corpus: procedurally drawn faces with 194-point Helen-layout landmarks.

Useful for tests and demos where the real image collection is not available.
Index layout follows the Helen convention used by the shipped box config:
jaw 0-40, nose 41-57, outer lip 58-85, inner lip 86-113, right eye 114-133,
left eye 134-153, right brow 154-173, left brow 174-193. "Right" is the
subject's right, i.e. the left side of the image.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .dataset import LandmarkSet

__all__ = ["make_face", "write_corpus", "write_landmarks"]


def _ellipse_points(cx, cy, rx, ry, n, a0=0.0, a1=2 * np.pi, endpoint=False):
    a = np.linspace(a0, a1, n, endpoint=endpoint)
    return np.column_stack([cx + rx * np.cos(a), cy + ry * np.sin(a)])


def _fill_ellipse(img, cx, cy, rx, ry, value, soft=1.0):
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    d = np.sqrt(((xs + 0.5 - cx) / rx) ** 2 + ((ys + 0.5 - cy) / ry) ** 2)
    alpha = np.clip((1.0 - d) * min(rx, ry) / soft, 0.0, 1.0)
    img[:] = img * (1 - alpha) + value * alpha


def make_face(width: int = 160, height: int = 120, rng=None, image_id: str = "face"):
    """Draw one face; returns ``(image, LandmarkSet)`` with the image in [0, 1]."""
    rng = np.random.default_rng(rng)
    bg = ndimage.gaussian_filter(rng.random((height, width)), sigma=max(2.0, width / 20))
    bg = 0.25 + 0.3 * (bg - bg.min()) / max(np.ptp(bg), 1e-9)
    img = bg.copy()

    cx = width * rng.uniform(0.42, 0.58)
    cy = height * rng.uniform(0.45, 0.55)
    rx = width * rng.uniform(0.18, 0.24)
    ry = min(height * 0.42, rx * rng.uniform(1.2, 1.4))
    _fill_ellipse(img, cx, cy, rx, ry, rng.uniform(0.7, 0.85), soft=2.0)

    eye_dx, eye_y = rx * 0.42, cy - ry * 0.2
    erx, ery = rx * 0.2, ry * 0.09
    mouth_y, mrx, mry = cy + ry * 0.5, rx * 0.38, ry * 0.09

    pts = np.zeros((194, 2))
    # jaw: lower half of the outline, image-left to image-right
    pts[0:41] = _ellipse_points(cx, cy, rx * 0.98, ry * 0.98, 41, 0.0, np.pi, endpoint=True)[::-1]
    nose = np.linspace(cy - ry * 0.15, cy + ry * 0.25, 9)
    pts[41:50] = np.column_stack([np.full(9, cx), nose])
    pts[50:58] = _ellipse_points(cx, cy + ry * 0.28, rx * 0.15, ry * 0.05, 8)
    pts[58:86] = _ellipse_points(cx, mouth_y, mrx, mry, 28)
    pts[86:114] = _ellipse_points(cx, mouth_y, mrx * 0.8, mry * 0.4, 28)
    pts[114:134] = _ellipse_points(cx - eye_dx, eye_y, erx, ery, 20)
    pts[134:154] = _ellipse_points(cx + eye_dx, eye_y, erx, ery, 20)
    brow_y = eye_y - ry * 0.18
    pts[154:174] = _ellipse_points(cx - eye_dx, brow_y, erx * 1.2, ery * 0.5, 20)
    pts[174:194] = _ellipse_points(cx + eye_dx, brow_y, erx * 1.2, ery * 0.5, 20)

    for sx in (-1, 1):
        _fill_ellipse(img, cx + sx * eye_dx, eye_y, erx, ery, 0.95)
        _fill_ellipse(img, cx + sx * eye_dx, eye_y, ery * 0.9, ery * 0.9, 0.05)
        _fill_ellipse(img, cx + sx * eye_dx, brow_y, erx * 1.2, ery * 0.5, 0.2)
    _fill_ellipse(img, cx, mouth_y, mrx, mry, 0.3)
    _fill_ellipse(img, cx, cy + ry * 0.28, rx * 0.15, ry * 0.05, 0.5)

    img = np.clip(img + rng.normal(0, 0.01, img.shape), 0.0, 1.0)
    return img, LandmarkSet(image_id, pts)


def write_landmarks(lm: LandmarkSet, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(lm.image_id + "\n")
        for x, y in lm.points:
            f.write(f"{x:.6f} , {y:.6f}\n")


def write_corpus(out_dir, n: int = 10, width: int = 160, height: int = 120, seed: int = 0) -> list[str]:
    """Write ``n`` PNG + landmark pairs sharing a basename; returns the image ids."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = []
    for i in range(n):
        image_id = f"face_{i:03d}"
        img, lm = make_face(width, height, rng, image_id)
        Image.fromarray(np.floor(img * 255 + 0.5).astype(np.uint8), mode="L").save(out / f"{image_id}.png")
        write_landmarks(lm, out / f"{image_id}.txt")
        ids.append(image_id)
    return ids
