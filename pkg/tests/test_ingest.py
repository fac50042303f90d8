import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semff.ingest import (FEATURE_MAGIC, DetectionSet, FrameSequence, InputError, load_detections,
                          load_feature_matrix, load_flow_grid, load_frame_sequence, load_vector,
                          save_detections, save_feature_matrix, save_flow_grid, write_image)


def test_load_frame_sequence(frame_dir):
    seq = load_frame_sequence(frame_dir)
    assert seq.n == 10
    assert (seq.width, seq.height) == (64, 48)
    assert seq[0].dtype == np.uint8 and seq[0].shape == (48, 64, 3)


def test_frames_sorted_by_numeric_stem(tmp_path):
    # "10" sorts before "9" lexically; numeric order must win
    for k in (10, 9, 0):
        write_image(tmp_path / f"{k}.png", np.full((8, 8, 3), k, dtype=np.uint8))
    seq = load_frame_sequence(tmp_path)
    assert [int(f[0, 0, 0]) for f in seq.frames] == [0, 9, 10]


def test_ppm_frames(tmp_path):
    for k in range(3):
        write_image(tmp_path / f"{k:03d}.ppm", np.full((6, 5, 3), 40 * k, dtype=np.uint8))
    seq = load_frame_sequence(tmp_path)
    assert seq.n == 3 and int(seq[2][0, 0, 1]) == 80


def test_single_frame_rejected(tmp_path):
    write_image(tmp_path / "000000.png", np.zeros((48, 64, 3), dtype=np.uint8))
    with pytest.raises(InputError, match="need at least 2 frames"):
        load_frame_sequence(tmp_path)


def test_mixed_dimensions_name_the_file(tmp_path):
    write_image(tmp_path / "000000.png", np.zeros((48, 64, 3), dtype=np.uint8))
    write_image(tmp_path / "000001.png", np.zeros((24, 32, 3), dtype=np.uint8))
    with pytest.raises(InputError, match="000001.png"):
        load_frame_sequence(tmp_path)


def test_missing_directory(tmp_path):
    with pytest.raises(InputError, match="not found"):
        load_frame_sequence(tmp_path / "nope")


def test_unreadable_image(tmp_path):
    write_image(tmp_path / "000000.png", np.zeros((4, 4, 3), dtype=np.uint8))
    (tmp_path / "000001.png").write_bytes(b"not an image")
    with pytest.raises(InputError, match="000001.png"):
        load_frame_sequence(tmp_path)


def test_frame_sequence_invariant():
    with pytest.raises(InputError):
        FrameSequence([np.zeros((4, 4, 3))])


def _jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def test_empty_detection_file(tmp_path):
    ds = load_detections(_jsonl(tmp_path / "d.jsonl", []), 10)
    assert len(ds) == 10 and all(d == [] for d in ds.per_frame)


def test_single_detection(tmp_path):
    rec = {"frame": 3, "class_id": 0, "confidence": 0.9, "bbox": [1, 1, 4, 4]}
    ds = load_detections(_jsonl(tmp_path / "d.jsonl", [rec]), 10)
    assert [len(d) for d in ds.per_frame] == [0, 0, 0, 1, 0, 0, 0, 0, 0, 0]
    det = ds[3][0]
    assert det.class_id == 0 and det.confidence == 0.9 and det.bbox == (1.0, 1.0, 4.0, 4.0)


@pytest.mark.parametrize("rec, msg", [
    ({"frame": 0, "class_id": 80, "confidence": 0.5, "bbox": [0, 0, 1, 1]}, "class out of range"),
    ({"frame": 0, "class_id": 1, "confidence": 1.5, "bbox": [0, 0, 1, 1]}, "confidence out of range"),
    ({"frame": 10, "class_id": 1, "confidence": 0.5, "bbox": [0, 0, 1, 1]}, "frame index out of range"),
    ({"frame": 0, "class_id": 1, "confidence": 0.5}, "malformed"),
])
def test_detection_errors(tmp_path, rec, msg):
    with pytest.raises(InputError, match=msg):
        load_detections(_jsonl(tmp_path / "d.jsonl", [rec]), 10)


def test_bbox_clamped_to_frame(tmp_path):
    rec = {"frame": 0, "class_id": 2, "confidence": 0.5, "bbox": [-4, 40, 20, 20]}
    ds = load_detections(_jsonl(tmp_path / "d.jsonl", [rec]), 2, frame_size=(64, 48))
    assert ds[0][0].bbox == (0.0, 40.0, 16.0, 8.0)


def test_detections_round_trip(tmp_path):
    recs = [{"frame": 1, "class_id": 5, "confidence": 0.25, "bbox": [1.5, 2, 3, 4]},
            {"frame": 1, "class_id": 0, "confidence": 1.0, "bbox": [0, 0, 8, 8]}]
    ds = load_detections(_jsonl(tmp_path / "a.jsonl", recs), 3)
    save_detections(tmp_path / "b.jsonl", ds)
    assert load_detections(tmp_path / "b.jsonl", 3) == ds


def test_feature_matrix_header_layout(tmp_path):
    D = np.arange(6, dtype=np.float32).reshape(2, 3)
    p = tmp_path / "f.bin"
    save_feature_matrix(p, D)
    raw = p.read_bytes()
    assert raw[:4] == FEATURE_MAGIC
    assert struct.unpack("<III", raw[4:16]) == (1, 2, 3)
    # column-major payload
    assert np.frombuffer(raw[16:], "<f4").tolist() == [0, 3, 1, 4, 2, 5]
    np.testing.assert_array_equal(load_feature_matrix(p), D)


def test_feature_matrix_size_mismatch(tmp_path):
    p = tmp_path / "f.bin"
    p.write_bytes(FEATURE_MAGIC + struct.pack("<III", 1, 2, 3) + np.zeros(5, "<f4").tobytes())
    with pytest.raises(InputError, match="payload size mismatch"):
        load_feature_matrix(p)


def test_feature_csv(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("f=2,n=3\n1,2,3\n4,5,6\n")
    np.testing.assert_array_equal(load_feature_matrix(p), [[1, 2, 3], [4, 5, 6]])
    p.write_text("f=2,n=3\n1,2,3\n4,5\n")
    with pytest.raises(InputError, match="payload size mismatch"):
        load_feature_matrix(p)


def test_descriptor_sized_matrix(tmp_path, rng):
    D = rng.random((446, 100)).astype(np.float32)
    save_feature_matrix(tmp_path / "f.bin", D)
    out = load_feature_matrix(tmp_path / "f.bin", mmap=True)
    assert out.shape == (446, 100)
    np.testing.assert_array_equal(out, D)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(width=32, allow_nan=False)))
def test_feature_round_trip_is_bit_exact(tmp_path_factory, D):
    p = tmp_path_factory.mktemp("rt") / "f.bin"
    save_feature_matrix(p, D)
    out = load_feature_matrix(p)
    assert np.array_equal(out.view(np.uint32), D.view(np.uint32))


def test_flow_grid_round_trip(tmp_path, rng):
    dx = rng.normal(size=(4, 6, 8))
    dy = rng.normal(size=(4, 6, 8))
    save_flow_grid(tmp_path / "fl.bin", dx, dy)
    raw = (tmp_path / "fl.bin").read_bytes()
    assert struct.unpack("<III", raw[4:16]) == (8, 6, 4)
    gx, gy = load_flow_grid(tmp_path / "fl.bin")
    np.testing.assert_array_equal(gx, dx.astype(np.float32))
    np.testing.assert_array_equal(gy, dy.astype(np.float32))


def test_load_vector(tmp_path):
    np.savetxt(tmp_path / "v.txt", [0.5, 1.0, 2.0])
    np.save(tmp_path / "v.npy", np.array([1.0, 2.0]))
    assert load_vector(tmp_path / "v.txt").tolist() == [0.5, 1.0, 2.0]
    assert load_vector(tmp_path / "v.npy").tolist() == [1.0, 2.0]
    with pytest.raises(InputError):
        load_vector(tmp_path / "missing.txt")


def test_empty_detection_set():
    assert DetectionSet.empty(3).per_frame == [[], [], []]
