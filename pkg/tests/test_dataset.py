import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from evface.dataset import (
    EYE,
    FACE,
    AnnotationSet,
    BoxClassConfig,
    LandmarkSet,
    ManifestEntry,
    export_sample,
    generate_sample,
    landmarks_to_boxes,
    load_box_config,
    load_grayscale,
    load_landmarks,
    project_annotations,
    read_manifest,
    sample_seed,
    split_dataset,
    stable_hash64,
    to_uint8,
    write_manifest,
)
from evface.errors import ConfigError, DataError, DegenerateAnnotationError, ParseError, PointAtInfinityError
from evface.formats import Box, read_labels
from evface.geometry import CameraPose, Intrinsics, MotionConfig, pose_to_homography
from evface.representation import TbrConfig, TbrFrame
from evface.simulator import SimConfig
from evface.synthetic import make_face, write_landmarks

DIMS = (640, 480)
SMALL = BoxClassConfig(eye_left_indices=(2, 4), eye_right_indices=(0, 2))


def shift_h(dx, dy=0.0):
    return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])


def pixel_box(box, dims=DIMS):
    w, h = dims
    return ((box.cx - box.w / 2) * w, (box.cy - box.h / 2) * h, (box.cx + box.w / 2) * w, (box.cy + box.h / 2) * h)


def entries(n):
    return [ManifestEntry(f"images/s{i}.png", f"labels/s{i}.txt", f"id{i}", i) for i in range(n)]


# -- landmarks ----------------------------------------------------------------


def test_load_landmarks_keeps_order(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("img_001\n1.5 , 2.0\n3.0 , 4.25\n\n5 , 6\n")
    lm = load_landmarks(p)
    assert lm.image_id == "img_001" and lm.count == 3
    assert lm.points.tolist() == [[1.5, 2.0], [3.0, 4.25], [5.0, 6.0]]


def test_malformed_landmark_line_is_numbered(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("img\n1 , 2\nabc , 1.0\n")
    with pytest.raises(ParseError) as info:
        load_landmarks(p)
    assert info.value.line == 3


def test_empty_landmark_file(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("")
    with pytest.raises(DataError):
        load_landmarks(p)
    p.write_text("only_an_id\n")
    with pytest.raises(DataError):
        load_landmarks(p)


def test_helen_layout_fixture_parses(tmp_path):
    _, lm = make_face(rng=0, image_id="helen_like")
    p = tmp_path / "helen_like.txt"
    write_landmarks(lm, p)
    back = load_landmarks(p)
    assert back.count == 194
    np.testing.assert_allclose(back.points, lm.points, atol=1e-6)


def test_landmark_set_rejects_non_finite():
    with pytest.raises(DataError):
        LandmarkSet("x", [(1.0, float("nan"))])


# -- box derivation -------------------------------------------------------------


def test_face_box_margin_arithmetic():
    pts = [(10, 10), (110, 210), (110, 10), (10, 210), (60, 110)]
    cfg = BoxClassConfig(eye_left_indices=(2, 4), eye_right_indices=(0, 2), face_margin=0.1)
    ann = landmarks_to_boxes(LandmarkSet("r", pts), cfg, DIMS)
    face = ann.boxes[0]
    assert face.cls == FACE
    np.testing.assert_allclose(pixel_box(face), (0, 0, 120, 230), atol=1e-9)


def test_all_points_coincident_is_degenerate():
    with pytest.raises(DegenerateAnnotationError):
        landmarks_to_boxes(LandmarkSet("d", [(50, 50)] * 4), SMALL, DIMS)


def test_two_point_eye_range_gives_small_box():
    pts = [(100, 100), (120, 110), (300, 100), (330, 112), (50, 40), (400, 300)]
    ann = landmarks_to_boxes(LandmarkSet("e", pts), SMALL, DIMS)
    assert [b.cls for b in ann.boxes] == [FACE, EYE, EYE]
    # left eye uses points 2..3: 30 x 12 px, plus 25% per side
    np.testing.assert_allclose(pixel_box(ann.boxes[1]), (292.5, 97.0, 337.5, 115.0), atol=1e-9)
    np.testing.assert_allclose(pixel_box(ann.boxes[2]), (95.0, 97.5, 125.0, 112.5), atol=1e-9)


def test_box_config_validation():
    with pytest.raises(ConfigError):
        BoxClassConfig(eye_left_indices=(5, 5))
    with pytest.raises(ConfigError):
        BoxClassConfig(eye_left_indices=(0, 10), eye_right_indices=(5, 15))
    with pytest.raises(ConfigError):
        BoxClassConfig(face_margin=-0.1)
    with pytest.raises(ConfigError):
        landmarks_to_boxes(LandmarkSet("few", [(1, 1), (5, 5)]), BoxClassConfig(), DIMS)


def test_shipped_box_config_is_helen_layout():
    cfg = load_box_config()
    assert cfg.eye_left_indices == (134, 154) and cfg.eye_right_indices == (114, 134)
    assert (cfg.face_margin, cfg.eye_margin, cfg.min_visible_fraction) == (0.10, 0.25, 0.25)


def test_synthetic_face_boxes_hit_the_eyes():
    img, lm = make_face(rng=3)
    ann = landmarks_to_boxes(lm, load_box_config(), (img.shape[1], img.shape[0]))
    right, left = ann.boxes[2], ann.boxes[1]
    assert right.cx < left.cx  # subject's right eye is on the image left
    face = ann.boxes[0]
    for eye in (left, right):
        assert abs(eye.cx - face.cx) < face.w / 2 and abs(eye.cy - face.cy) < face.h / 2


# -- projection ---------------------------------------------------------------


def test_identity_projection_is_unchanged():
    ann = AnnotationSet("a", [Box(0, 0.5, 0.5, 0.25, 0.3), Box(1, 0.4, 0.45, 0.05, 0.02)])
    out = project_annotations(ann, np.eye(3), DIMS, BoxClassConfig())
    for a, b in zip(ann.boxes, out.boxes):
        np.testing.assert_allclose(a.xywh, b.xywh, atol=1e-12)


def test_shift_projection_moves_centre_only():
    ann = AnnotationSet("a", [Box(0, 0.5, 0.5, 0.25, 0.3)])
    (b,) = project_annotations(ann, shift_h(6.4), DIMS, BoxClassConfig()).boxes
    assert b.cx == pytest.approx(0.5 + 6.4 / 640, abs=1e-12)
    assert (b.cy, b.w, b.h) == pytest.approx((0.5, 0.25, 0.3), abs=1e-12)


def test_mostly_hidden_eye_is_dropped():
    face = Box(0, 0.5, 0.5, 0.5, 0.5)
    eye = Box(1, 0.95, 0.5, 0.04, 0.04)  # x in [595.2, 620.8], 25.6 px wide
    ann = AnnotationSet("a", [face, eye])
    # shift so 90% of the eye's width leaves the frame on the right
    dx = 640 - (620.8 - 0.9 * 25.6) + 0.0
    out = project_annotations(ann, shift_h(dx), DIMS, BoxClassConfig(min_visible_fraction=0.25))
    assert [b.cls for b in out.boxes] == [FACE]
    # a face half out is still kept, clipped to the frame
    (f,) = project_annotations(AnnotationSet("a", [face]), shift_h(320), DIMS, BoxClassConfig()).boxes
    assert f.cx + f.w / 2 == pytest.approx(1.0)


def test_projection_point_at_infinity_propagates():
    # w = 1 - x / 159.5 vanishes at the top-left corner (160, 120) minus half a pixel
    h = np.array([[1.0, 0, 0], [0, 1.0, 0], [-1 / 159.5, 0, 1.0]])
    ann = AnnotationSet("a", [Box(0, 0.5, 0.5, 0.5, 0.5)])
    with pytest.raises(PointAtInfinityError):
        project_annotations(ann, h, DIMS, BoxClassConfig(min_visible_fraction=0.0))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_inverse_recovers_boxes(seed):
    # Exact recovery needs a map that keeps boxes axis-aligned (scale plus
    # shift); a general homography turns the box into a quadrilateral whose
    # bounding rectangle is strictly larger.
    rng = np.random.default_rng(seed)
    s, (tx, ty) = rng.uniform(0.9, 1.1), rng.uniform(-30, 30, 2)
    h = np.array([[s, 0.0, tx], [0.0, s, ty], [0.0, 0.0, 1.0]])
    box = Box(int(rng.integers(0, 2)), *rng.uniform(0.4, 0.6, 2), *rng.uniform(0.05, 0.3, 2))
    cfg = BoxClassConfig(min_visible_fraction=0.0)
    there = project_annotations(AnnotationSet("a", [box]), h, DIMS, cfg)
    back = project_annotations(there, np.linalg.inv(h), DIMS, cfg).boxes[0]
    assert np.max(np.abs(np.subtract(back.xywh, box.xywh))) < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projected_boxes_stay_normalized(seed):
    rng = np.random.default_rng(seed)
    pose = CameraPose.from_vector(rng.uniform(-1, 1, 6) * np.array([0.05, 0.05, 0.05, 0.3, 0.3, 0.03]))
    h = pose_to_homography(pose, Intrinsics.default(*DIMS))
    boxes = [Box(int(rng.integers(0, 2)), *rng.uniform(0.1, 0.9, 2), *rng.uniform(0.02, 0.3, 2)) for _ in range(5)]
    for b in project_annotations(AnnotationSet("a", boxes), h, DIMS, BoxClassConfig()).boxes:
        assert 0 <= b.cx <= 1 and 0 <= b.cy <= 1 and 0 < b.w <= 1 and 0 < b.h <= 1
        assert b.cx - b.w / 2 >= -1e-12 and b.cx + b.w / 2 <= 1 + 1e-12


# -- export -------------------------------------------------------------------


def test_to_uint8_rounds_to_nearest():
    assert to_uint8([0.0, 1.0, 0.5, 1 / 255, 0.5 / 255, 2.0]).tolist() == [0, 255, 128, 1, 1, 255]


def test_export_writes_image_and_label(tmp_path):
    values = np.full((48, 64), 1.0)
    values[0, 0] = 0.0
    ann = AnnotationSet("src", [Box(0, 0.5, 0.5, 0.25, 0.3)])
    (entry,) = export_sample([TbrFrame(values, 0, 8)], [ann], tmp_path, "s0", seed=5)
    img = np.asarray(Image.open(tmp_path / entry.sample_path))
    assert img.dtype == np.uint8 and img.shape == (48, 64)
    assert img[0, 0] == 0 and img[1, 1] == 255
    assert (tmp_path / entry.label_path).read_text() == "0 0.500000 0.500000 0.250000 0.300000\n"
    assert entry == ManifestEntry("images/s0.png", "labels/s0.txt", "src", 5)


def test_resize_keeps_labels(tmp_path):
    values = np.random.default_rng(0).random((480, 640))
    ann = AnnotationSet("src", [Box(0, 0.5, 0.5, 0.25, 0.3), Box(1, 0.3, 0.4, 0.05, 0.04)])
    (a,) = export_sample([values], [ann], tmp_path / "a", "x")
    (b,) = export_sample([values], [ann], tmp_path / "b", "x", resize=(256, 256))
    assert Image.open(tmp_path / "b" / b.sample_path).size == (256, 256)
    assert (tmp_path / "a" / a.label_path).read_bytes() == (tmp_path / "b" / b.label_path).read_bytes()


def test_export_multi_frame_names_and_mismatch(tmp_path):
    ann = AnnotationSet("src", [])
    out = export_sample([np.zeros((4, 4))] * 3, [ann] * 3, tmp_path, "s")
    assert [e.sample_path for e in out] == ["images/s_0000.png", "images/s_0001.png", "images/s_0002.png"]
    assert read_labels(tmp_path / out[0].label_path) == []
    with pytest.raises(DataError):
        export_sample([np.zeros((4, 4))] * 2, [ann], tmp_path, "s")


def test_export_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        export_sample([np.zeros((4, 4))], [AnnotationSet("a", [])], blocker / "sub", "s")


def test_manifest_round_trip(tmp_path):
    p = tmp_path / "m.tsv"
    write_manifest(entries(5), p)
    assert read_manifest(p) == entries(5)
    assert p.read_text().splitlines()[1] == "images/s1.png\tlabels/s1.txt\tid1\t1"
    with pytest.raises(DataError):
        write_manifest(entries(2) + entries(1), p)


# -- splitting ------------------------------------------------------------------


def test_split_ten_is_eight_two():
    train, val = split_dataset(entries(10), 0.8, seed=0)
    assert (len(train), len(val)) == (8, 2)


def test_split_deterministic():
    assert split_dataset(entries(10), 0.8, 3) == split_dataset(entries(10), 0.8, 3)
    assert any(split_dataset(entries(10), 0.8, s)[1] != split_dataset(entries(10), 0.8, 0)[1] for s in range(1, 10))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60), st.floats(0.05, 0.95), st.integers(0, 2**63))
def test_split_partitions(n, ratio, seed):
    es = entries(n)
    train, val = split_dataset(es, ratio, seed)
    assert len(train) == int(np.floor(ratio * n + 0.5))
    assert set(train) | set(val) == set(es) and not set(train) & set(val)


def test_split_errors():
    with pytest.raises(DataError):
        split_dataset([], 0.8)
    with pytest.raises(ConfigError):
        split_dataset(entries(3), 1.0)


# -- seeds and generation ---------------------------------------------------------


def test_sample_seed_is_stable():
    # documented algorithm: BLAKE2b with an 8-byte digest, little-endian
    assert stable_hash64("") == int.from_bytes(bytes.fromhex("e4a6a0577479b2b4"), "little")
    assert sample_seed(0, "face_000") == stable_hash64("face_000")
    assert sample_seed(42, "a") == 42 ^ stable_hash64("a")
    assert sample_seed(1, "a") != sample_seed(1, "b")


def test_load_grayscale(tmp_path):
    Image.fromarray(np.array([[0, 255], [51, 102]], dtype=np.uint8)).save(tmp_path / "g.png")
    np.testing.assert_allclose(load_grayscale(tmp_path / "g.png"), [[0, 1], [0.2, 0.4]])
    (tmp_path / "bad.png").write_bytes(b"nope")
    with pytest.raises(DataError):
        load_grayscale(tmp_path / "bad.png")


def test_generate_sample_single_frame():
    img, lm = make_face(rng=1)
    s = generate_sample(img, lm, MotionConfig(0.5, 100, seed=7), SimConfig(), load_box_config())
    assert len(s.frames) == 1 and len(s.annotations) == 1
    assert len(s.events) > 0 and len(s.stream) == 100
    assert [b.cls for b in s.annotations[0].boxes].count(FACE) == 1
    for b in s.annotations[0].boxes:
        assert 0 <= b.cx <= 1 and 0 <= b.cy <= 1 and 0 < b.w <= 1 and 0 < b.h <= 1
    again = generate_sample(img, lm, MotionConfig(0.5, 100, seed=7), SimConfig(), load_box_config())
    assert np.array_equal(s.frames[0].values, again.frames[0].values)
    assert s.annotations[0].boxes == again.annotations[0].boxes


def test_generate_sample_stream_mode_and_seed_override():
    img, lm = make_face(rng=2)
    tbr = TbrConfig(delta_t=100_000, n_bits=8)
    s = generate_sample(img, lm, MotionConfig(0.5, 100), SimConfig(), load_box_config(), tbr, single_frame=False, seed=11)
    # 3.3 s of frames plus one µs -> 34 windows -> 5 frames
    assert len(s.frames) == 5 == len(s.annotations)
    assert s.seed == 11
