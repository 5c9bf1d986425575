#!/usr/bin/env python3
# Temporal Binary Representation: N windows of "did this pixel fire?" bits
# packed into one frame, one binary number per pixel.
#
#   python3 demos/03_tbr_frames.py [output_dir]

import sys
from pathlib import Path

import numpy as np
from PIL import Image

from evface.dataset import to_uint8
from evface.geometry import MotionConfig, sample_trajectory
from evface.representation import BinaryFrame, TbrConfig, decode_tbr, encode_tbr, single_frame_config, stream_encode, window_count
from evface.simulator import SimConfig, simulate_sequence, stream_frames
from evface.synthetic import make_face

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "03_tbr"
out.mkdir(parents=True, exist_ok=True)

# A single pixel active in windows 0, 3 and 7 of 8 encodes 10010001 = 145.
cfg = TbrConfig(delta_t=10_000, n_bits=8)
bits = [BinaryFrame(np.array([[1 if i in (0, 3, 7) else 0]]), i) for i in range(8)]
tbr = encode_tbr(bits, cfg)
print("value:", tbr.values[0, 0], "= 145/255:", tbr.values[0, 0] == 145 / 255)
print("decoded windows:", [i for i, b in enumerate(decode_tbr(tbr, cfg)) if b.bits[0, 0]])

img, _ = make_face(160, 120, rng=0)
events = simulate_sequence(stream_frames(img, sample_trajectory(MotionConfig(0.5, 100, seed=1))), SimConfig())

# Streaming mode: 3.3 s of events in 10 ms windows, 8 windows per frame.
w = window_count(events.span, cfg.delta_t)
frames = stream_encode(events, cfg)
print(f"{w} windows -> {len(frames)} frames (ceil({w}/8) = {-(-w // 8)})")
for k, f in enumerate(frames[:5]):
    Image.fromarray(to_uint8(f.values)).save(out / f"stream_{k:02d}.png")

# Single-frame mode stretches the windows so the whole stream fits one frame.
single = single_frame_config(events, 8)
(frame,) = stream_encode(events, single)
print(f"single-frame window: {single.delta_t} us, {np.count_nonzero(frame.values)} active pixels")
Image.fromarray(to_uint8(frame.values)).save(out / "single.png")

# Nothing is lost: decoding returns exactly the per-window bitmaps.
windows = decode_tbr(frame, single)
print("bits set per window:", [int(b.bits.sum()) for b in windows])
print("images written to", out)
