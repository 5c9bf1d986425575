#!/usr/bin/env python3
# From frames to events: each pixel fires whenever its log intensity moves a
# full contrast threshold away from the level at its last event.
#
#   python3 demos/02_events_from_motion.py [output_dir]

import sys
from pathlib import Path

import numpy as np

from evface.formats import read_events, write_events, write_events_csv
from evface.geometry import MotionConfig, sample_trajectory
from evface.simulator import SimConfig, simulate_sequence, stream_frames
from evface.synthetic import make_face

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "02_events"
out.mkdir(parents=True, exist_ok=True)

img, _ = make_face(160, 120, rng=0)
frames = stream_frames(img, sample_trajectory(MotionConfig(0.5, 100, seed=1)), fps=30)
print(f"{len(frames)} frames, last timestamp {frames.timestamps[-1]} us")

events = simulate_sequence(frames, SimConfig(contrast_threshold_pos=0.15, contrast_threshold_neg=0.15))
ev = events.events
print(f"{len(ev)} events, {ev['p'].mean():.1%} positive")

# Events only appear while the camera moves, and mostly along edges.
per_frame, _ = np.histogram(ev["t"], bins=frames.timestamps)
print("events between consecutive frames (first 20):", per_frame[:20].tolist())
hot = np.zeros((events.height, events.width), int)
np.add.at(hot, (ev["y"], ev["x"]), 1)
print(f"{(hot > 0).mean():.1%} of pixels fired at least once")

# A higher threshold means fewer events.
for c in (0.1, 0.2, 0.3, 0.5):
    print(f"threshold {c}: {len(simulate_sequence(frames, SimConfig(c, c)))} events")

# With a refractory period a pixel stays silent for a while after firing.
print("refractory 5 ms:", len(simulate_sequence(frames, SimConfig(refractory_us=5000))), "events")

# EVS1 is a 16-byte header plus 13 bytes per event.
n = write_events(events, out / "face.evs")
print(f"face.evs: {n} bytes = 16 + 13 * {len(ev)}")
assert read_events(out / "face.evs") == events
write_events_csv(events, out / "face.csv")
print("first CSV lines:", (out / "face.csv").read_text().splitlines()[:3])
