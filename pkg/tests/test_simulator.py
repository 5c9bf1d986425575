import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evface.errors import ConfigError, StateError
from evface.geometry import CameraPose, MotionConfig, sample_trajectory
from evface.simulator import (
    EVENT_DTYPE,
    FrameStream,
    PixelState,
    SimConfig,
    frame_timestamps,
    round_half_away,
    simulate_events,
    simulate_sequence,
    stream_frames,
)

C = 0.15


def step_pixel(k, t0=0, t1=1000, cfg=SimConfig(), base=0.5):
    """One pixel changing by k thresholds in log space over [t0, t1]."""
    prev = np.array([[base]])
    nxt = np.array([[base * math.exp(k * C)]])
    state = PixelState.from_frame(prev, cfg)
    return simulate_events(prev, nxt, t0, t1, cfg, state), state


def reference_events(frames, timestamps, cfg):
    """Scalar per-pixel model: crossings of ref +/- C along a linear log path."""
    c_pos, c_neg = cfg.contrast_threshold_pos, cfg.contrast_threshold_neg
    logs = [np.log(np.maximum(f, cfg.log_eps)) for f in frames]
    h, w = logs[0].shape
    out = []
    for y in range(h):
        for x in range(w):
            ref = logs[0][y, x]
            last = None
            for i in range(len(frames) - 1):
                a, b = logs[i][y, x], logs[i + 1][y, x]
                t0, t1 = timestamps[i], timestamps[i + 1]
                while True:
                    if b - ref >= c_pos - 1e-9 * c_pos:
                        level, pol = ref + c_pos, 1
                    elif ref - b >= c_neg - 1e-9 * c_neg:
                        level, pol = ref - c_neg, 0
                    else:
                        break
                    frac = min(max((level - a) / (b - a), 0.0), 1.0) if b != a else 1.0
                    t = math.floor(t0 + frac * (t1 - t0) + 0.5)
                    ref = level
                    if last is None or t - last >= cfg.refractory_us:
                        out.append((t, y, x, pol))
                        last = t
    out.sort()
    return out


def as_tuples(ev):
    return [(int(r["t"]), int(r["y"]), int(r["x"]), int(r["p"])) for r in ev]


def test_equal_frames_give_no_events():
    img = np.random.default_rng(0).random((8, 9))
    state = PixelState.from_frame(img, SimConfig())
    assert len(simulate_events(img, img, 0, 1000, SimConfig(), state)) == 0


def test_two_threshold_rise_closed_form():
    ev, _ = step_pixel(2.0)
    assert ev["t"].tolist() == [500, 1000]
    assert ev["p"].tolist() == [1, 1]


def test_one_and_a_half_threshold_fall_closed_form():
    ev, _ = step_pixel(-1.5)
    assert ev["t"].tolist() == [667]
    assert ev["p"].tolist() == [0]


def test_reference_moves_by_threshold():
    _, state = step_pixel(2.6)
    assert state.reference[0, 0] == pytest.approx(math.log(0.5) + 2 * C)
    assert state.last_event[0, 0] == round_half_away(2 / 2.6 * 1000)


@settings(max_examples=200, deadline=None)
@given(st.floats(-6.0, 6.0), st.sampled_from([0.05, 0.1, 0.15, 0.3]))
def test_count_oracle(k, thr):
    cfg = SimConfig(thr, thr)
    prev = np.array([[0.4]])
    nxt = np.array([[0.4 * math.exp(k * thr)]])
    ev = simulate_events(prev, nxt, 0, 1000, cfg, PixelState.from_frame(prev, cfg))
    assert len(ev) == math.floor(abs(k) + 1e-9)
    assert set(ev["p"].tolist()) <= {1 if k > 0 else 0}


def test_refractory_suppresses_close_events():
    cfg = SimConfig(refractory_us=400)
    ev, state = step_pixel(3.0, cfg=cfg)
    # crossings at 333, 667, 1000; 667 is only 334 after 333
    assert ev["t"].tolist() == [333, 1000]
    assert state.last_event[0, 0] == 1000


def test_dimension_mismatch_is_state_error():
    state = PixelState.from_frame(np.zeros((4, 4)), SimConfig())
    with pytest.raises(StateError):
        simulate_events(np.zeros((4, 5)), np.zeros((4, 5)), 0, 10, SimConfig(), state)
    with pytest.raises(ConfigError):
        simulate_events(np.zeros((4, 4)), np.zeros((4, 4)), 10, 10, SimConfig(), state)


def test_sim_config_validation():
    for kw in ({"contrast_threshold_pos": 0}, {"log_eps": 0}, {"refractory_us": -1}, {"fps": 0}):
        with pytest.raises(ConfigError):
            SimConfig(**kw)


def test_batch_sorted_by_t_y_x():
    rng = np.random.default_rng(3)
    prev = rng.uniform(0.1, 1, (16, 16))
    nxt = rng.uniform(0.1, 1, (16, 16))
    ev = simulate_events(prev, nxt, 0, 5000, SimConfig(), PixelState.from_frame(prev, SimConfig()))
    keys = list(zip(ev["t"].tolist(), ev["y"].tolist(), ev["x"].tolist()))
    assert keys == sorted(keys)
    assert ev.dtype == EVENT_DTYPE


# -- frame streams --------------------------------------------------------


def test_timestamps_rounded():
    ts = frame_timestamps(100, 30.0)
    assert ts[:4] == [0, 33333, 66667, 100000]
    assert ts[-1] == 3300000
    assert round_half_away(2.5) == 3 and round_half_away(-2.5) == -3


def test_identity_poses_reproduce_source():
    img = np.random.default_rng(0).random((12, 16))
    fs = stream_frames(img, [CameraPose()] * 5)
    assert len(fs) == 5
    assert all(np.array_equal(f, img) for f in fs.frames)
    assert all(np.array_equal(h, np.eye(3)) for h in fs.homographies)


def test_default_motion_gives_100_frames():
    poses = sample_trajectory(MotionConfig(pause_probability=0.5, max_frames=100, seed=1))
    fs = stream_frames(np.full((10, 10), 0.5), poses, fps=30)
    assert len(fs) == 100
    assert fs.timestamps[-1] == 3300000


def test_stream_frames_requires_poses():
    with pytest.raises(ConfigError):
        stream_frames(np.zeros((4, 4)), [])


def test_uint8_input_is_scaled():
    fs = stream_frames(np.full((3, 3), 255, dtype=np.uint8), [CameraPose()])
    assert fs.frames[0].max() == 1.0


def test_static_sequence_gives_zero_events():
    img = np.random.default_rng(1).random((10, 10))
    es = simulate_sequence(stream_frames(img, [CameraPose()] * 10), SimConfig())
    assert len(es) == 0
    assert es.duration == frame_timestamps(10, 30)[-1]


def moving_edge_stream(n=6, width=24, height=4, step=1.5):
    frames, ts = [], []
    xs = np.arange(width) + 0.5
    for i in range(n):
        edge = 4 + step * i
        frames.append(np.tile(np.clip(xs - edge + 0.5, 0, 1) * 0.8 + 0.1, (height, 1)))
        ts.append(i * 10_000)
    return FrameStream(frames, ts, [np.eye(3)] * n)


def test_moving_edge_matches_scalar_oracle():
    fs = moving_edge_stream()
    cfg = SimConfig()
    es = simulate_sequence(fs, cfg)
    expected = reference_events(fs.frames, fs.timestamps, cfg)
    assert as_tuples(es.events) == expected
    assert len(es) > 0
    # only columns swept by the edge fire
    assert es.events["x"].min() >= 3 and es.events["x"].max() <= 4 + 1.5 * 5 + 1


def test_refractory_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    frames = [rng.uniform(0.05, 1.0, (6, 7)) for _ in range(5)]
    fs = FrameStream(frames, [0, 700, 1500, 2100, 3000], [np.eye(3)] * 5)
    cfg = SimConfig(0.1, 0.2, refractory_us=150)
    assert as_tuples(simulate_sequence(fs, cfg).events) == reference_events(frames, fs.timestamps, cfg)


def test_sequence_deterministic_and_sorted():
    img = np.random.default_rng(2).random((20, 24))
    poses = sample_trajectory(MotionConfig(pause_probability=0.2, max_frames=15, seed=9))
    a = simulate_sequence(stream_frames(img, poses), SimConfig())
    b = simulate_sequence(stream_frames(img, poses), SimConfig())
    assert a == b and len(a) > 0
    keys = list(zip(a.events["t"].tolist(), a.events["y"].tolist(), a.events["x"].tolist()))
    assert keys == sorted(keys)


def test_monotonic_pixels_keep_polarity():
    ramp = [np.full((3, 3), v) for v in (0.1, 0.2, 0.4, 0.9)]
    es = simulate_sequence(FrameStream(ramp, [0, 10, 20, 30], [np.eye(3)] * 4), SimConfig())
    assert len(es) and set(es.events["p"].tolist()) == {1}
    down = ramp[::-1]
    es = simulate_sequence(FrameStream(down, [0, 10, 20, 30], [np.eye(3)] * 4), SimConfig())
    assert len(es) and set(es.events["p"].tolist()) == {0}


def test_raising_threshold_never_adds_events():
    img = np.random.default_rng(4).random((24, 32))
    poses = sample_trajectory(MotionConfig(pause_probability=0.3, max_frames=12, seed=4))
    fs = stream_frames(img, poses)
    counts = [len(simulate_sequence(fs, SimConfig(c, c))) for c in (0.05, 0.1, 0.15, 0.3, 0.6)]
    assert counts == sorted(counts, reverse=True)
