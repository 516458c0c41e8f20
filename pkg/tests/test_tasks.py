import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from dashnas import reference, tasks


def test_ground_truth_conv_is_planted_convolution():
    t = tasks.ground_truth_conv(k_star=5, d_star=3, n=32, num_samples=100, num_test=20, noise=0.0, seed=2)
    x, y = t.train
    assert y.shape == x.shape
    assert np.allclose(y, reference.conv1d(x, t.planted_kernel, 3), atol=1e-12)
    assert np.isclose(np.linalg.norm(t.planted_kernel), 1.0)
    assert t.head_kind == "dense" and t.noise_floor == 0.0


def test_split_sizes_and_full_train():
    t = tasks.ground_truth_conv(num_samples=2000, num_test=500)
    assert (len(t.train[0]), len(t.val[0]), len(t.test[0])) == (1600, 400, 500)
    assert len(t.full_train()[0]) == 2000


def test_generators_are_seeded():
    a = tasks.sum_of_dilated_motifs(n=32, num_samples=50, num_test=10, seed=4)
    b = tasks.sum_of_dilated_motifs(n=32, num_samples=50, num_test=10, seed=4)
    c = tasks.sum_of_dilated_motifs(n=32, num_samples=50, num_test=10, seed=5)
    assert np.array_equal(a.train[0], b.train[0]) and not np.array_equal(a.train[0], c.train[0])
    assert a.head_kind == "classification" and a.num_outputs == 4
    assert set(np.unique(a.train[1])) <= set(range(4))


def test_make_task_dispatch():
    assert tasks.make_task("ground_truth_conv", n=16, num_samples=10, num_test=5).kind == "ground_truth_conv"
    with pytest.raises(ValueError):
        tasks.make_task("nope")
    with pytest.raises(ValueError):
        tasks.sum_of_dilated_motifs(num_classes=1)


@settings(max_examples=30, deadline=None)
@given(arrays(st.sampled_from([np.float64, np.float32, np.int64, np.uint8]), array_shapes(min_dims=1, max_dims=3)),
       st.sampled_from(["binary", "csv"]))
def test_container_round_trip(tmp_path_factory, a, fmt):
    if a.dtype.kind == "f" and not np.all(np.isfinite(a)):
        a = np.nan_to_num(a, nan=0.0, posinf=1.0, neginf=-1.0)
    path = tmp_path_factory.mktemp("arr") / "a.dat"
    tasks.save_array(path, a, fmt)
    b = tasks.load_array(path)
    assert b.dtype == a.dtype and b.shape == a.shape
    assert np.array_equal(a, b)


def test_container_rejects_bad_input(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"XYZ dtype=<f8 dims=2\n")
    with pytest.raises(ValueError):
        tasks.load_array(bad)
    tasks.save_array(bad, np.zeros(4))
    bad.write_bytes(bad.read_bytes()[:-3])
    with pytest.raises(ValueError):
        tasks.load_array(bad)
    with pytest.raises(ValueError):
        tasks.save_array(bad, np.zeros(2), "parquet")


@pytest.mark.parametrize("fmt", ["binary", "csv"])
def test_task_round_trip(tmp_path, fmt):
    t = tasks.ground_truth_conv(n=16, num_samples=30, num_test=10, seed=1)
    tasks.save_task(t, tmp_path / "t", fmt)
    u = tasks.load_task(tmp_path / "t")
    assert u.metadata() == t.metadata()
    for name in ("train", "val", "test"):
        assert all(np.array_equal(p, q) for p, q in zip(getattr(t, name), getattr(u, name)))


def test_idx_reader(tmp_path):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    path = tmp_path / "img.idx"
    path.write_bytes(struct.pack(">HBB", 0, 0x08, 3) + struct.pack(">3I", 2, 3, 4) + images.tobytes())
    loaded = tasks.load_idx(path)
    assert np.array_equal(loaded, images)
    seq = tasks.sequences_from_images(loaded)
    assert seq.shape == (2, 1, 12) and seq.dtype == np.float64
    path.write_bytes(b"\x01\x00\x08\x01")
    with pytest.raises(ValueError):
        tasks.load_idx(path)
