"""Planar camera motion: 6-DOF trajectories, pose homographies and warping.

A pose describes the camera relative to a fronto-parallel plane holding the
source picture. Homographies map *source* pixel coordinates to *frame* pixel
coordinates, so a warped frame is sampled through the inverse map.

Pixel centres sit on integer coordinates; ``(0, 0)`` is the centre of the
top-left pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial.transform import Rotation

from .errors import ConfigError, GeometryError, PointAtInfinityError

__all__ = [
    "CameraPose",
    "Intrinsics",
    "MotionConfig",
    "DEFAULT_STEP_STD",
    "DEFAULT_AMPLITUDE_CLAMP",
    "Border",
    "MIRRORED",
    "rotation_matrix",
    "sample_trajectory",
    "pose_to_homography",
    "relative_homography",
    "normalize_homography",
    "warp_image",
    "warp_points",
]

# (rx, ry, rz, tx, ty, tz)
DEFAULT_STEP_STD = (0.002, 0.002, 0.002, 0.003, 0.003, 0.001)
DEFAULT_AMPLITUDE_CLAMP = (0.05, 0.05, 0.05, 0.08, 0.08, 0.03)


@dataclass(frozen=True)
class CameraPose:
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        rot = tuple(float(v) for v in self.rotation)
        trans = tuple(float(v) for v in self.translation)
        if len(rot) != 3 or len(trans) != 3:
            raise GeometryError("rotation and translation must be 3-vectors")
        if not all(math.isfinite(v) for v in rot + trans):
            raise GeometryError(f"non-finite pose component in {rot + trans}")
        if math.sqrt(sum(v * v for v in rot)) >= math.pi:
            raise GeometryError("rotation angle must be below pi")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def from_vector(cls, v) -> CameraPose:
        v = [float(x) for x in v]
        return cls(tuple(v[:3]), tuple(v[3:6]))

    def as_vector(self) -> np.ndarray:
        return np.array(self.rotation + self.translation, dtype=np.float64)


@dataclass(frozen=True)
class Intrinsics:
    focal: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"bad image dims {self.width}x{self.height}")
        if not 0 <= self.cx < self.width or not 0 <= self.cy < self.height:
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @classmethod
    def default(cls, width: int, height: int) -> Intrinsics:
        """Focal length equal to the image width, principal point at the centre."""
        return cls(float(width), (width - 1) / 2.0, (height - 1) / 2.0, int(width), int(height))

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.focal, 0.0, self.cx], [0.0, self.focal, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class MotionConfig:
    pause_probability: float = 0.5
    max_frames: int = 100
    step_std: tuple[float, ...] = DEFAULT_STEP_STD
    amplitude_clamp: tuple[float, ...] = DEFAULT_AMPLITUDE_CLAMP
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "step_std", tuple(float(v) for v in self.step_std))
        object.__setattr__(
            self, "amplitude_clamp", tuple(float(v) for v in self.amplitude_clamp)
        )
        if not 0.0 <= self.pause_probability <= 1.0:
            raise ConfigError(f"pause_probability {self.pause_probability} not in [0, 1]")
        if int(self.max_frames) != self.max_frames or self.max_frames < 1:
            raise ConfigError(f"max_frames must be a positive integer, got {self.max_frames}")
        if len(self.step_std) != 6 or any(not v >= 0 for v in self.step_std):
            raise ConfigError("step_std must be six non-negative values")
        if len(self.amplitude_clamp) != 6 or any(not v > 0 for v in self.amplitude_clamp):
            raise ConfigError("amplitude_clamp must be six positive values")
        # a pose at the clamp must still be a valid rotation
        if math.sqrt(sum(v * v for v in self.amplitude_clamp[:3])) >= math.pi:
            raise ConfigError("rotation clamps allow angles >= pi")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def sample_trajectory(config: MotionConfig) -> list[CameraPose]:
    """Clamped Gaussian random walk over the six pose components.

    Frame 0 is the identity pose. At every later frame the walk either holds
    (with ``pause_probability``) or adds an independent zero-mean Gaussian
    step per component; the result is clipped to ``±amplitude_clamp``.
    Randomness comes from numpy's PCG64 seeded with ``config.seed``. Every
    frame consumes one uniform and six normal draws whether or not it pauses,
    so a sequence prefix does not depend on ``max_frames``.
    """
    if not isinstance(config, MotionConfig):
        raise ConfigError("expected a MotionConfig")
    rng = np.random.Generator(np.random.PCG64(int(config.seed)))
    std = np.asarray(config.step_std)
    clamp = np.asarray(config.amplitude_clamp)

    current = np.zeros(6)
    poses = [CameraPose()]
    for _ in range(1, config.max_frames):
        pause = rng.random() < config.pause_probability
        step = rng.standard_normal(6) * std
        if not pause:
            current = np.clip(current + step, -clamp, clamp)
        poses.append(CameraPose.from_vector(current))
    return poses


def rotation_matrix(rotvec) -> np.ndarray:
    """Rotation matrix of an axis-angle vector (radians)."""
    return Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix()


def normalize_homography(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise GeometryError("homography must be a finite 3x3 matrix")
    if m[2, 2] == 0.0:
        raise GeometryError("cannot normalize homography with m[2][2] = 0")
    out = m / m[2, 2]
    det = np.linalg.det(out)
    if not np.isfinite(det) or abs(det) < 1e-12:
        raise GeometryError(f"singular homography (det={det:g})")
    return out


def pose_to_homography(pose: CameraPose, k: Intrinsics, plane_depth: float = 1.0) -> np.ndarray:
    """Homography K (R + t n^T / d) K^-1 induced by the plane z = d, n = (0, 0, 1)."""
    if not plane_depth > 0:
        raise GeometryError(f"plane_depth must be positive, got {plane_depth}")
    if not k.focal > 0:
        raise GeometryError(f"singular intrinsics (focal={k.focal})")
    if pose.rotation == (0.0, 0.0, 0.0) and pose.translation == (0.0, 0.0, 0.0):
        return np.eye(3)
    K = k.matrix()
    K_inv = np.array(
        [
            [1.0 / k.focal, 0.0, -k.cx / k.focal],
            [0.0, 1.0 / k.focal, -k.cy / k.focal],
            [0.0, 0.0, 1.0],
        ]
    )
    R = rotation_matrix(pose.rotation)
    t = np.asarray(pose.translation).reshape(3, 1)
    n = np.array([[0.0, 0.0, 1.0]])
    return normalize_homography(K @ (R + (t @ n) / plane_depth) @ K_inv)


def relative_homography(
    pose_a: CameraPose, pose_b: CameraPose, k: Intrinsics, plane_depth: float = 1.0
) -> np.ndarray:
    """Map from the frame seen at ``pose_a`` to the frame seen at ``pose_b``."""
    if pose_a == pose_b:
        return np.eye(3)
    ha = pose_to_homography(pose_a, k, plane_depth)
    hb = pose_to_homography(pose_b, k, plane_depth)
    try:
        ha_inv = np.linalg.inv(ha)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("singular intermediate homography") from exc
    return normalize_homography(hb @ ha_inv)


@dataclass(frozen=True)
class Border:
    """Out-of-bounds policy for :func:`warp_image`.

    ``mode="mirrored"`` reflects about the edge pixel centre without
    repeating it (reflect-101, ``d c b | a b c d | c b a``);
    ``mode="constant"`` fills with ``value``.
    """

    mode: str = "mirrored"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("mirrored", "constant"):
            raise ConfigError(f"unknown border mode {self.mode!r}")

    @classmethod
    def constant(cls, value: float = 0.0) -> Border:
        return cls("constant", float(value))


MIRRORED = Border()


def warp_image(src, h, border: Border = MIRRORED) -> np.ndarray:
    """Bilinear inverse-mapped warp; output has the dims of ``src``.

    Output pixel ``(x, y)`` samples ``src`` at ``H^-1 (x, y, 1)``.
    """
    img = np.asarray(src, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise GeometryError("warp_image expects a non-empty 2-D grayscale image")
    m = normalize_homography(h)
    if np.array_equal(m, np.eye(3)):
        return img.copy()
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("non-invertible homography") from exc

    height, width = img.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    pts = np.stack([xs.ravel(), ys.ravel(), np.ones(xs.size)])
    sx, sy, sw = inv @ pts
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = sx / sw
        sy = sy / sw
    bad = ~(np.isfinite(sx) & np.isfinite(sy))
    # points behind the camera never sample the image
    sx[bad] = -1e6
    sy[bad] = -1e6

    if border.mode == "mirrored":
        out = ndimage.map_coordinates(img, [sy, sx], order=1, mode="mirror")
    else:
        out = ndimage.map_coordinates(
            img, [sy, sx], order=1, mode="grid-constant", cval=border.value
        )
    return out.reshape(height, width)


def warp_points(pts, h) -> np.ndarray:
    """Map ``(x, y)`` pixel points through ``h``; no clipping.

    Returns an ``(n, 2)`` float array. Raises :class:`PointAtInfinityError`
    naming the first point whose homogeneous scale vanishes.
    """
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    m = np.asarray(h, dtype=np.float64)
    if m.shape != (3, 3):
        raise GeometryError("homography must be 3x3")
    homog = np.column_stack([p, np.ones(len(p))]) @ m.T
    w = homog[:, 2]
    zero = np.flatnonzero(np.abs(w) < 1e-12)
    if zero.size:
        raise PointAtInfinityError(int(zero[0]))
    return homog[:, :2] / w[:, None]
