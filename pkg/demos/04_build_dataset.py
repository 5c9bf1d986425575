#!/usr/bin/env python3
# A labelled dataset end to end: landmarks become face and eye boxes, the
# boxes follow the camera motion, and every source image yields one TBR frame.
#
#   python3 demos/04_build_dataset.py [output_dir]

import sys
from pathlib import Path

from evface.dataset import (
    export_sample,
    generate_sample,
    landmarks_to_boxes,
    load_box_config,
    load_grayscale,
    load_landmarks,
    sample_seed,
    split_dataset,
    write_manifest,
)
from evface.geometry import MotionConfig
from evface.representation import TbrConfig
from evface.simulator import SimConfig
from evface.synthetic import write_corpus

root = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "04_dataset"
corpus, out = root / "corpus", root / "dataset"

# Ten image + landmark pairs sharing a basename, 194 points each.
ids = write_corpus(corpus, n=10, width=160, height=120, seed=0)
box_cfg = load_box_config()  # eye index ranges of the usual 194-point layout
print("box config:", box_cfg.to_dict())

lm = load_landmarks(corpus / f"{ids[0]}.txt")
ann = landmarks_to_boxes(lm, box_cfg, (160, 120))
print(f"{lm.image_id}: {lm.count} landmarks ->", [(b.cls, round(b.cx, 3), round(b.cy, 3)) for b in ann.boxes])

entries = []
for image_id in ids:
    img = load_grayscale(corpus / f"{image_id}.png")
    lm = load_landmarks(corpus / f"{image_id}.txt")
    # each image gets its own seed: global seed XOR a hash of its id
    seed = sample_seed(42, image_id)
    sample = generate_sample(img, lm, MotionConfig(0.5, 100), SimConfig(), box_cfg, TbrConfig(n_bits=8), seed=seed)
    entries += export_sample(sample.frames, sample.annotations, out, image_id, seed=seed, image_id=image_id)
    print(f"{image_id}: {len(sample.events):6d} events, {len(sample.frames)} frame, "
          f"{len(sample.annotations[0])} boxes")

train, val = split_dataset(entries, 0.8, seed=42)
write_manifest(entries, out / "manifest.tsv")
write_manifest(train, out / "train.tsv")
write_manifest(val, out / "val.tsv")
print(f"{len(entries)} samples, {len(train)} train / {len(val)} val")
print("labels of the first sample:")
print((out / entries[0].label_path).read_text())
