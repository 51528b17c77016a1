"""Datasets: synthetic generators, CIFAR-10 binary batches, and splitting.

Images are float32 arrays of shape (N, C, H, W) with values in [0, 1].
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CIFAR_SHAPE = (3, 32, 32)
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)

SYNTHETIC_KINDS = ("gaussian-blobs", "striped-images", "robust-tradeoff")


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 4:
            raise ValueError(f"images must be (N, C, H, W), got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ValueError(f"labels shape {labels.shape} does not match {images.shape[0]} images")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, index):
        index = np.asarray(index)
        return Dataset(self.images[index], self.labels[index], self.num_classes)

    def batches(self, batch_size, order=None, drop_last=True):
        """Yield (images, labels) batches in ``order`` (default: stored order)."""
        order = np.arange(len(self)) if order is None else order
        stop = len(order) - len(order) % batch_size if drop_last else len(order)
        for start in range(0, stop, batch_size):
            idx = order[start : start + batch_size]
            yield self.images[idx], self.labels[idx]


def balanced_labels(n, classes, rng):
    """``n`` labels with every class count within one of the others, shuffled."""
    return rng.permutation(np.arange(n) % classes)


def gen_synthetic(kind, n, classes, image_shape=(3, 8, 8), seed=0, **options):
    """Generate a synthetic classification dataset.

    gaussian-blobs: isotropic Gaussian clusters around well separated class
        means (``sigma`` and ``separation`` in units of sigma).
    striped-images: sinusoidal stripes whose orientation and spatial
        frequency encode the class, with random phase and pixel noise; the
        mean pixel carries no class signal, so spatial filters are needed.
    robust-tradeoff: two classes; a bright/dark corner patch agrees with the
        label with probability ``patch_accuracy`` (robust, imperfect), while
        every other pixel is shifted by ``label * weak_shift`` under noise
        (highly predictive in aggregate but flippable by an L-inf attack of
        radius above ``weak_shift``).
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    image_shape = tuple(int(d) for d in image_shape)
    if len(image_shape) != 3 or min(image_shape) < 1:
        raise ValueError(f"image_shape must be three positive dims (C, H, W), got {image_shape}")
    if classes < 2 or n < classes:
        raise ValueError(f"need classes >= 2 and n >= classes, got n={n}, classes={classes}")
    rng = np.random.default_rng(seed)
    labels = balanced_labels(n, classes, rng)
    maker = {"gaussian-blobs": _blobs, "striped-images": _stripes, "robust-tradeoff": _tradeoff}[kind]
    images = maker(labels, classes, image_shape, rng, **options)
    return Dataset(np.clip(images, 0.0, 1.0).astype(np.float32), labels, classes)


def _blobs(labels, classes, shape, rng, sigma=0.05, separation=6.0):
    d = int(np.prod(shape))
    means = None
    for _ in range(1000):
        cand = rng.uniform(0.2, 0.8, (classes, d))
        gaps = np.linalg.norm(cand[:, None] - cand[None], axis=-1)[np.triu_indices(classes, 1)]
        if gaps.min() >= separation * sigma:
            means = cand
            break
    if means is None:
        raise ValueError("could not place class means that far apart; lower separation or raise dims")
    x = means[labels] + sigma * rng.standard_normal((len(labels), d))
    return x.reshape((len(labels),) + shape)


def _stripes(labels, classes, shape, rng, amplitude=0.35, noise=0.08):
    c, h, w = shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    out = np.empty((len(labels),) + shape)
    for k, label in enumerate(labels):
        freq = 1 + label // 2
        coord = yy / h if label % 2 == 0 else xx / w
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * freq * coord + phase)
        out[k] = 0.5 + amplitude * wave[None] + noise * rng.standard_normal(shape)
    return out


def _tradeoff(labels, classes, shape, rng, patch=3, patch_accuracy=0.9, patch_contrast=0.3,
              weak_shift=0.02, noise=0.1):
    if classes != 2:
        raise ValueError("robust-tradeoff is a two-class task")
    sign = np.where(labels == 1, 1.0, -1.0)
    out = 0.5 + sign[:, None, None, None] * weak_shift + noise * rng.standard_normal((len(labels),) + shape)
    agree = rng.random(len(labels)) < patch_accuracy
    patch_sign = np.where(agree, sign, -sign)
    out[:, :, :patch, :patch] = 0.5 + patch_sign[:, None, None, None] * patch_contrast
    return out


# CIFAR-10 binary batches

def _record_size(image_shape):
    return 1 + int(np.prod(image_shape))


def parse_records(raw, image_shape=CIFAR_SHAPE, max_label=9, source="<bytes>"):
    """Parse label-byte-plus-pixels records into (uint8 images, labels)."""
    size = _record_size(image_shape)
    if len(raw) % size:
        whole = len(raw) // size
        raise ValueError(f"{source}: truncated record at byte offset {whole * size} "
                         f"({len(raw)} bytes is not a multiple of {size})")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, size)
    labels = rec[:, 0].astype(np.int64)
    bad = np.nonzero(labels > max_label)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"{source}: label byte {labels[i]} > {max_label} at byte offset {i * size}")
    return rec[:, 1:].reshape((-1,) + tuple(image_shape)), labels


def read_records(path, image_shape=CIFAR_SHAPE, max_label=9):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing batch file {path}")
    return parse_records(path.read_bytes(), image_shape, max_label, str(path))


def write_records(dataset, path):
    """Dump a dataset in the label-byte-plus-pixels record format."""
    if dataset.num_classes > 256:
        raise ValueError("record format stores labels in one byte")
    pixels = np.rint(dataset.images * 255).astype(np.uint8).reshape(len(dataset), -1)
    rec = np.concatenate([dataset.labels.astype(np.uint8)[:, None], pixels], axis=1)
    Path(path).write_bytes(rec.tobytes())


def balanced_subset(labels, size, classes, rng):
    """Indices of a class-balanced random subset (counts differ by at most one)."""
    counts = np.full(classes, size // classes)
    counts[: size % classes] += 1
    picks = []
    for c in range(classes):
        pool = np.nonzero(labels == c)[0]
        if len(pool) < counts[c]:
            raise ValueError(f"class {c} has only {len(pool)} examples, {counts[c]} requested")
        picks.append(rng.choice(pool, counts[c], replace=False))
    return np.sort(np.concatenate(picks))


def load_cifar10(path, subset=None, seed=0, train=True):
    """Load CIFAR-10 binary batches from a directory (or a single batch file)."""
    path = Path(path)
    if path.is_dir():
        files = [path / name for name in (CIFAR_TRAIN_FILES if train else CIFAR_TEST_FILES)]
    else:
        files = [path]
    parts = [read_records(f) for f in files]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    if subset is not None:
        idx = balanced_subset(labels, subset, 10, np.random.default_rng(seed))
        images, labels = images[idx], labels[idx]
    return Dataset(images.astype(np.float32) / np.float32(255.0), labels, 10)


def split_indices(n, fraction=0.5, seed=0):
    if not 0.0 < fraction < 1.0:
        raise ValueError("split fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(n * fraction))
    return perm[:cut], perm[cut:]


def split(dataset, fraction=0.5, seed=0):
    """Disjoint, exhaustive random split into (first, second) parts."""
    a, b = split_indices(len(dataset), fraction, seed)
    return dataset.subset(a), dataset.subset(b)
