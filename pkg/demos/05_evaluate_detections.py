#!/usr/bin/env python3
# Scoring detections: greedy IoU matching, all-point average precision and
# the precision / recall / F1 / box error summary.
#
#   python3 demos/05_evaluate_detections.py

import numpy as np

from evface.formats import Box, Detection
from evface.metrics import average_precision, evaluate, iou

# Two corner boxes overlapping in a unit square: 1 / (4 + 4 - 1).
print("IoU of (0,0)-(2,2) and (1,1)-(3,3):", iou((1, 1, 2, 2), (2, 2, 2, 2)))

# The classic hand example: hit, miss, hit over two ground truths.
g1, g2 = (0.25, 0.25, 0.2, 0.2), (0.75, 0.75, 0.2, 0.2)
gts = {"img": [Box(0, *g1), Box(0, *g2)]}
preds = [Detection("img", 0, 0.9, *g1), Detection("img", 0, 0.8, 0.25, 0.75, 0.2, 0.2), Detection("img", 0, 0.7, *g2)]
print("AP:", average_precision(preds, gts, 0), "(5/6 =", 5 / 6, ")")

# A small synthetic test set: one face and two eyes per image.
rng = np.random.default_rng(0)
gts = {}
for i in range(20):
    cx, cy = rng.uniform(0.35, 0.65, 2)
    gts[f"s{i:02d}"] = [
        Box(0, cx, cy, 0.4, 0.5),
        Box(1, cx - 0.08, cy - 0.08, 0.08, 0.04),
        Box(1, cx + 0.08, cy - 0.08, 0.08, 0.04),
    ]

# A detector that finds most boxes with a little jitter and adds a few mistakes.
preds = []
for image_id, boxes in gts.items():
    for b in boxes:
        if rng.random() < 0.85:
            j = rng.normal(0, 0.004, 4)
            preds.append(Detection(image_id, b.cls, float(rng.uniform(0.6, 1)), b.cx + j[0], b.cy + j[1], b.w + j[2], b.h + j[3]))
    if rng.random() < 0.3:
        preds.append(Detection(image_id, 1, float(rng.uniform(0, 0.7)), *rng.uniform(0.1, 0.9, 2), 0.05, 0.03))

report = evaluate(preds, gts)
print(report.to_text())
print(report.to_table())
