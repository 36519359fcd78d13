import math
import struct

import numpy as np
import pytest

from icgt.datasets import (ingest_mnist_idx, read_idx_images, read_idx_labels,
                           synth_dataset, write_idx_images, write_idx_labels)
from icgt.objectives import LogisticObjective, solve_reference


def make_pair(tmp_path, images, labels):
    ip, lp = tmp_path / "imgs.idx", tmp_path / "labs.idx"
    write_idx_images(ip, images)
    write_idx_labels(lp, labels)
    return ip, lp


def test_magic_encoding(tmp_path):
    path = tmp_path / "imgs.idx"
    write_idx_images(path, np.zeros((1, 2, 2), dtype=np.uint8))
    raw = path.read_bytes()
    assert raw[:4] == b"\x00\x00\x08\x03"
    assert struct.unpack(">i", raw[:4])[0] == 2051


def test_roundtrip_fixture(tmp_path):
    images = np.array([
        [[0, 255], [128, 1]],
        [[255, 255], [0, 0]],
        [[7, 7], [7, 7]],
        [[1, 2], [3, 4]],
    ], dtype=np.uint8)
    labels = np.array([0, 1, 0, 1], dtype=np.uint8)
    ip, lp = make_pair(tmp_path, images, labels)
    assert np.array_equal(read_idx_images(ip), images)
    assert np.array_equal(read_idx_labels(lp), labels)

    ds = ingest_mnist_idx(ip, lp, class_pair=(0, 1))
    assert ds.features.shape == (4, 4)  # 2x2 flattened row-major
    assert ds.features.max() <= 1.0 and ds.features.min() >= 0.0
    assert np.allclose(ds.features[0], [0.0, 1.0, 128 / 255, 1 / 255])
    assert np.array_equal(ds.labels, [0.0, 1.0, 0.0, 1.0])


def test_class_filter_and_remap(tmp_path):
    images = np.arange(3 * 4, dtype=np.uint8).reshape(3, 2, 2)
    labels = np.array([3, 5, 3], dtype=np.uint8)
    ip, lp = make_pair(tmp_path, images, labels)
    ds = ingest_mnist_idx(ip, lp, class_pair=(3, 5))
    assert np.array_equal(ds.labels, [0.0, 1.0, 0.0])
    assert ds.provenance["class_pair"] == (3, 5)


def test_wrong_magic_rejected(tmp_path):
    images = np.zeros((2, 2, 2), dtype=np.uint8)
    labels = np.zeros(2, dtype=np.uint8)
    ip, lp = make_pair(tmp_path, images, labels)
    with pytest.raises(ValueError, match="magic"):
        read_idx_labels(ip)  # images file parsed as labels
    with pytest.raises(ValueError, match="magic"):
        read_idx_images(lp)


def test_count_mismatch_rejected(tmp_path):
    ip, lp = make_pair(tmp_path, np.zeros((3, 2, 2), dtype=np.uint8),
                       np.zeros(2, dtype=np.uint8))
    with pytest.raises(ValueError, match="count"):
        ingest_mnist_idx(ip, lp)


def test_truncated_payload(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(struct.pack(">iiii", 2051, 10, 2, 2) + b"\x00" * 5)
    with pytest.raises(ValueError, match="truncated"):
        read_idx_images(path)


def test_same_class_pair_rejected(tmp_path):
    ip, lp = make_pair(tmp_path, np.zeros((1, 2, 2), dtype=np.uint8),
                       np.zeros(1, dtype=np.uint8))
    with pytest.raises(ValueError):
        ingest_mnist_idx(ip, lp, class_pair=(1, 1))


def test_synth_determinism():
    a = synth_dataset(50, 4, seed=3, separation=2.0)
    b = synth_dataset(50, 4, seed=3, separation=2.0)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_synth_uninformative_at_zero_separation():
    ds = synth_dataset(400, 3, seed=1, separation=0.0)
    obj = LogisticObjective([(ds.features, ds.labels)], reg_lambda=0.05)
    ref = solve_reference(obj)
    assert ref.grad_norm <= 1e-10
    assert abs(ref.f_star - math.log(2.0)) < 0.05
    assert np.linalg.norm(ref.x_star) < 0.5


def test_synth_separable_reaches_low_loss():
    ds = synth_dataset(400, 3, seed=2, separation=12.0)
    obj = LogisticObjective([(ds.features, ds.labels)], reg_lambda=0.01)
    ref = solve_reference(obj)
    assert ref.grad_norm <= 1e-10
    assert ref.f_star < 0.25


def test_synth_validation():
    with pytest.raises(ValueError):
        synth_dataset(0, 3)
