#!/usr/bin/env python3
# Planar camera motion: a random walk over six pose components turns one
# still image into a short video of the image plane seen from a moving camera.
#
#   python3 demos/01_planar_motion.py [output_dir]

import sys
from pathlib import Path

import numpy as np
from PIL import Image

from evface.dataset import to_uint8
from evface.geometry import Border, Intrinsics, MotionConfig, pose_to_homography, sample_trajectory, warp_image, warp_points
from evface.synthetic import make_face

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "01_planar_motion"
out.mkdir(parents=True, exist_ok=True)

# A procedurally drawn face stands in for a real annotated photo.
img, landmarks = make_face(160, 120, rng=0)
k = Intrinsics.default(160, 120)  # focal length = width, principal point at the centre
print("intrinsics:\n", k.matrix())

# Half the frames hold the previous pose, the rest take a small Gaussian step.
poses = sample_trajectory(MotionConfig(pause_probability=0.5, max_frames=100, seed=1))
vectors = np.array([p.as_vector() for p in poses])
held = np.all(vectors[1:] == vectors[:-1], axis=1).mean()
print(f"{len(poses)} poses, {held:.0%} of steps paused")
print("largest excursion per component (rx ry rz tx ty tz):", np.abs(vectors).max(axis=0).round(4))

# Each pose becomes a homography of the plane z = 1 in front of the camera.
last = pose_to_homography(poses[-1], k)
print("homography of the last pose:\n", last.round(5))

# The landmark at the tip of the nose moves with the plane.
nose = landmarks.points[49]
print("nose tip", nose.round(2), "->", warp_points([nose - 0.5], last)[0].round(2) + 0.5)

# Render a few frames with both border modes.
for i in (0, 33, 66, 99):
    h = pose_to_homography(poses[i], k)
    Image.fromarray(to_uint8(warp_image(img, h, Border("mirrored")))).save(out / f"frame_{i:03d}_mirrored.png")
    Image.fromarray(to_uint8(warp_image(img, h, Border.constant(0.0)))).save(out / f"frame_{i:03d}_constant.png")
print("frames written to", out)
