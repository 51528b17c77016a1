import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnas.data import (
    CIFAR_SHAPE, SYNTHETIC_KINDS, Dataset, gen_synthetic, load_cifar10, parse_records, split, split_indices,
    write_records,
)


@pytest.mark.parametrize("kind", ["gaussian-blobs", "striped-images"])
def test_classes_balanced(kind):
    d = gen_synthetic(kind, 100, 10, seed=3)
    assert np.bincount(d.labels, minlength=10).tolist() == [10] * 10
    d = gen_synthetic(kind, 23, 4, seed=3)
    counts = np.bincount(d.labels, minlength=4)
    assert counts.max() - counts.min() <= 1


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_same_seed_same_bytes(kind):
    a = gen_synthetic(kind, 50, 2, seed=11)
    b = gen_synthetic(kind, 50, 2, seed=11)
    assert a.images.tobytes() == b.images.tobytes() and a.labels.tobytes() == b.labels.tobytes()
    assert a.images.dtype == np.float32 and a.images.min() >= 0 and a.images.max() <= 1


def test_linear_probe_separates_blobs():
    d = gen_synthetic("gaussian-blobs", 2000, 10, (3, 8, 8), seed=0)
    x = np.c_[d.images.reshape(len(d), -1), np.ones(len(d))]
    targets = np.eye(10)[d.labels]
    w, *_ = np.linalg.lstsq(x[:1000], targets[:1000], rcond=None)
    acc = np.mean((x[1000:] @ w).argmax(axis=1) == d.labels[1000:])
    assert acc >= 0.99


def test_stripes_carry_no_mean_pixel_signal():
    d = gen_synthetic("striped-images", 2000, 4, seed=0)
    means = [d.images[d.labels == c].mean() for c in range(4)]
    assert max(means) - min(means) < 0.01


def test_invalid_arguments_rejected():
    with pytest.raises(ValueError):
        gen_synthetic("striped-images", 10, 2, image_shape=(3, 0, 8))
    with pytest.raises(ValueError):
        gen_synthetic("striped-images", 10, 2, image_shape=(8, 8))
    with pytest.raises(ValueError):
        gen_synthetic("striped-images", 3, 5)
    with pytest.raises(ValueError):
        gen_synthetic("noise", 10, 2)
    with pytest.raises(ValueError):
        gen_synthetic("robust-tradeoff", 10, 3)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1, 2, 2)), [0, 2], 2)
    with pytest.raises(ValueError):
        Dataset(np.full((2, 1, 2, 2), 1.5), [0, 1], 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2, 2)), [0, 1], 2)


# CIFAR-10 binary records


def fake_cifar(n, seed=0, classes=10):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    pixels = rng.integers(0, 256, (n, 3072), dtype=np.uint8)
    return np.concatenate([labels.astype(np.uint8)[:, None], pixels], axis=1)


def test_first_label_byte_parses(tmp_path):
    rec = fake_cifar(1)
    rec[0, 0] = 7
    path = tmp_path / "one.bin"
    path.write_bytes(rec.tobytes())
    d = load_cifar10(path)
    assert d.labels.tolist() == [7]
    assert d.images.shape == (1,) + CIFAR_SHAPE
    assert d.images[0, 0, 0, 0] == np.float32(rec[0, 1]) / np.float32(255)
    assert d.images[0, 2, 31, 31] == np.float32(rec[0, 3072]) / np.float32(255)


def test_truncated_and_bad_label_rejected(tmp_path):
    rec = fake_cifar(3).tobytes()
    with pytest.raises(ValueError, match="byte offset 6146"):
        parse_records(rec[:-10])
    bad = bytearray(rec)
    bad[3073] = 10
    with pytest.raises(ValueError, match="byte offset 3073"):
        parse_records(bytes(bad))
    with pytest.raises(FileNotFoundError):
        load_cifar10(tmp_path / "missing.bin")


def test_directory_layout_and_balanced_subset(tmp_path):
    for i in range(1, 6):
        (tmp_path / f"data_batch_{i}.bin").write_bytes(fake_cifar(400, seed=i).tobytes())
    (tmp_path / "test_batch.bin").write_bytes(fake_cifar(100, seed=9).tobytes())
    full = load_cifar10(tmp_path)
    assert full.images.shape == (2000, 3, 32, 32)
    sub = load_cifar10(tmp_path, subset=1000, seed=4)
    assert np.bincount(sub.labels).tolist() == [100] * 10
    assert len(load_cifar10(tmp_path, train=False)) == 100
    scaled = sub.images * 255
    assert np.all(np.abs(scaled - np.rint(scaled)) <= 0.5)


@pytest.mark.skipif(not os.environ.get("RNAS_CIFAR_DIR"), reason="set RNAS_CIFAR_DIR to the unpacked binary batches")
def test_full_cifar_training_set():
    d = load_cifar10(Path(os.environ["RNAS_CIFAR_DIR"]))
    assert d.images.shape == (50000, 3, 32, 32)


def test_record_round_trip(tmp_path):
    d = gen_synthetic("striped-images", 20, 10, CIFAR_SHAPE, seed=1)
    write_records(d, tmp_path / "s.bin")
    back = load_cifar10(tmp_path / "s.bin")
    assert np.array_equal(back.labels, d.labels)
    assert np.max(np.abs(back.images - d.images)) <= 0.5 / 255 + 1e-6


# splitting


def test_even_split_and_disjointness():
    d = gen_synthetic("gaussian-blobs", 100, 4, seed=0)
    a, b = split(d, 0.5, seed=0)
    assert len(a) == len(b) == 50
    ia, ib = split_indices(100, 0.5, 0)
    assert not set(ia) & set(ib)


def test_seeds_permute_differently_but_cover_the_same_multiset():
    a1, b1 = split_indices(60, 0.5, 1)
    a2, b2 = split_indices(60, 0.5, 2)
    assert not np.array_equal(a1, a2)
    assert sorted(np.r_[a1, b1]) == sorted(np.r_[a2, b2]) == list(range(60))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 500), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_split_properties(n, fraction, seed):
    a, b = split_indices(n, fraction, seed)
    assert len(a) + len(b) == n
    assert sorted(np.r_[a, b]) == list(range(n))
    a2, b2 = split_indices(n, fraction, seed)
    assert np.array_equal(a, a2) and np.array_equal(b, b2)


def test_split_fraction_bounds():
    with pytest.raises(ValueError):
        split_indices(10, 1.0)
