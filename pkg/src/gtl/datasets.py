"""Labelled datasets: synthetic blobs and spirals, plus an MNIST-subset
loader built on a strict IDX reader.

Synthetic data is split 80/20 deterministically from the seed; MNIST keeps
its official train/test split. Inputs are stored row-per-sample (m, dim).
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .numerics import spawn_rng

__all__ = [
    "Dataset",
    "make_dataset",
    "read_idx_images",
    "read_idx_labels",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    train_inputs: np.ndarray   # (m, dim)
    train_labels: np.ndarray   # (m,) ints in [0, n_classes)
    test_inputs: np.ndarray
    test_labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        for inputs, labels in (
            (self.train_inputs, self.train_labels),
            (self.test_inputs, self.test_labels),
        ):
            if inputs.shape[0] != labels.shape[0]:
                raise ValueError("inputs and labels must align")
            if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
                raise ValueError("labels must lie in [0, n_classes)")

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]


# ---------------------------------------------------------------------------
# IDX format
# ---------------------------------------------------------------------------

def _read_idx_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":  # gzip container; payload is still plain IDX
        raw = gzip.decompress(raw)
    return raw


def _be_u32(raw: bytes, offset: int, path, what: str) -> int:
    if len(raw) < offset + 4:
        raise FormatError(
            f"{path}: truncated reading {what}: need 4 bytes at offset {offset}, "
            f"file has {len(raw)} bytes"
        )
    return struct.unpack_from(">I", raw, offset)[0]


def read_idx_images(path) -> np.ndarray:
    """Read an IDX image file into a (n, rows*cols) float64 array in [0, 1].

    Layout: big-endian u32 magic 0x00000803, u32 count, u32 rows, u32 cols,
    then count*rows*cols unsigned bytes. Pixels are scaled by 1/255.
    """
    raw = _read_idx_bytes(path)
    magic = _be_u32(raw, 0, path, "magic")
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(
            f"{path}: bad image magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )
    n = _be_u32(raw, 4, path, "image count")
    rows = _be_u32(raw, 8, path, "row count")
    cols = _be_u32(raw, 12, path, "col count")
    expected = 16 + n * rows * cols
    if len(raw) != expected:
        raise FormatError(
            f"{path}: image payload ends at offset {len(raw)}, expected {expected}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    """Read an IDX label file into an (n,) int array.

    Layout: big-endian u32 magic 0x00000801, u32 count, then count bytes.
    """
    raw = _read_idx_bytes(path)
    magic = _be_u32(raw, 0, path, "magic")
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(
            f"{path}: bad label magic 0x{magic:08x} at offset 0, expected 0x{IDX_LABELS_MAGIC:08x}"
        )
    n = _be_u32(raw, 4, path, "label count")
    expected = 8 + n
    if len(raw) != expected:
        raise FormatError(
            f"{path}: label payload ends at offset {len(raw)}, expected {expected}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)


# ---------------------------------------------------------------------------
# dataset construction
# ---------------------------------------------------------------------------

def _split_80_20(inputs, labels, rng):
    order = rng.permutation(inputs.shape[0])
    cut = int(round(inputs.shape[0] * 0.8))
    tr, te = order[:cut], order[cut:]
    return inputs[tr], labels[tr], inputs[te], labels[te]


def _make_blobs(params: dict, seed: int) -> Dataset:
    n_classes = int(params.get("n_classes", 2))
    per_class = int(params.get("per_class", 100))
    dim = int(params.get("dim", 2))
    noise = float(params.get("noise", 0.5))
    radius = float(params.get("radius", 4.0))
    rng = spawn_rng(seed, 10)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = np.zeros((n_classes, dim))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1 % dim] = radius * np.sin(angles)
    inputs = np.concatenate(
        [centers[c] + noise * rng.normal(size=(per_class, dim)) for c in range(n_classes)]
    )
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(*_split_80_20(inputs, labels, rng), n_classes=n_classes)


def _make_spirals(params: dict, seed: int) -> Dataset:
    n_classes = int(params.get("n_classes", 2))
    per_class = int(params.get("per_class", 100))
    noise = float(params.get("noise", 0.1))
    turns = float(params.get("turns", 1.5))
    rng = spawn_rng(seed, 11)
    arms = []
    for c in range(n_classes):
        t = np.linspace(0.25, 1.0, per_class)
        theta = 2.0 * np.pi * (turns * t + c / n_classes)
        arm = np.stack([t * np.cos(theta), t * np.sin(theta)], axis=1)
        arms.append(arm + noise * rng.normal(size=arm.shape))
    inputs = np.concatenate(arms)
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(*_split_80_20(inputs, labels, rng), n_classes=n_classes)


def _filter_and_cap(inputs, labels, classes, cap):
    keep_class = {c: i for i, c in enumerate(classes)}
    counts = {c: 0 for c in classes}
    rows = []
    new_labels = []
    for i in range(labels.shape[0]):
        c = int(labels[i])
        if c not in keep_class:
            continue
        if cap is not None and counts[c] >= cap:
            continue
        counts[c] += 1
        rows.append(i)
        new_labels.append(keep_class[c])
    return inputs[rows], np.asarray(new_labels, dtype=np.int64)


def _make_mnist_subset(params: dict, seed: int) -> Dataset:
    del seed  # file-defined content and ordering; nothing to draw
    train_x = read_idx_images(params["train_images"])
    train_y = read_idx_labels(params["train_labels"])
    test_x = read_idx_images(params["test_images"])
    test_y = read_idx_labels(params["test_labels"])
    if train_x.shape[0] != train_y.shape[0] or test_x.shape[0] != test_y.shape[0]:
        raise FormatError("image and label counts disagree between paired files")
    classes = sorted(int(c) for c in params.get("classes", range(10)))
    cap = params.get("cap_per_class")
    cap = None if cap is None else int(cap)
    train_x, train_y = _filter_and_cap(train_x, train_y, classes, cap)
    test_x, test_y = _filter_and_cap(test_x, test_y, classes, None)
    return Dataset(train_x, train_y, test_x, test_y, n_classes=len(classes))


_MAKERS = {
    "blobs": _make_blobs,
    "spirals": _make_spirals,
    "mnist-subset": _make_mnist_subset,
}


def make_dataset(kind: str, params: dict | None = None, seed: int = 0) -> Dataset:
    """Build a dataset deterministically from (kind, params, seed)."""
    if kind not in _MAKERS:
        raise ValueError(f"unknown dataset kind {kind!r}; choose from {sorted(_MAKERS)}")
    return _MAKERS[kind](params or {}, seed)
