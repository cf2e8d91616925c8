import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from gtl.datasets import Dataset, make_dataset, read_idx_images, read_idx_labels
from gtl.errors import FormatError
from gtl.network import ridge_solve

MNIST_DIR = Path(__file__).resolve().parents[1] / "data" / "mnist"
MNIST_PARAMS = {
    "train_images": MNIST_DIR / "train-images-idx3-ubyte.gz",
    "train_labels": MNIST_DIR / "train-labels-idx1-ubyte.gz",
    "test_images": MNIST_DIR / "t10k-images-idx3-ubyte.gz",
    "test_labels": MNIST_DIR / "t10k-labels-idx1-ubyte.gz",
}

needs_mnist = pytest.mark.skipif(
    not MNIST_PARAMS["train_images"].exists(),
    reason="MNIST files not fetched (run scripts/fetch_mnist.py)",
)


def linear_fit_accuracy(data: Dataset) -> float:
    # one-vs-all ridge on a bias-augmented design; argmax prediction
    x = np.hstack([data.train_inputs, np.ones((data.train_inputs.shape[0], 1))]).T
    scores = []
    for c in range(data.n_classes):
        y = (data.train_labels == c).astype(float)
        scores.append(ridge_solve(x, y, 1e-8))
    w = np.stack(scores)
    preds = np.argmax(w @ x, axis=0)
    return float(np.mean(preds == data.train_labels))


def test_blobs_deterministic():
    a = make_dataset("blobs", {"n_classes": 2, "per_class": 100}, seed=3)
    b = make_dataset("blobs", {"n_classes": 2, "per_class": 100}, seed=3)
    assert np.array_equal(a.train_inputs, b.train_inputs)
    assert np.array_equal(a.test_labels, b.test_labels)


def test_blobs_split_sizes():
    data = make_dataset("blobs", {"n_classes": 3, "per_class": 50}, seed=0)
    assert data.train_inputs.shape == (120, 2)
    assert data.test_inputs.shape == (30, 2)
    assert data.n_classes == 3


def test_blobs_zero_noise_linearly_separable():
    data = make_dataset("blobs", {"n_classes": 2, "per_class": 40, "noise": 0.0}, seed=1)
    assert linear_fit_accuracy(data) == 1.0


def test_spirals_deterministic_and_shaped():
    a = make_dataset("spirals", {"n_classes": 2, "per_class": 80}, seed=4)
    b = make_dataset("spirals", {"n_classes": 2, "per_class": 80}, seed=4)
    assert np.array_equal(a.train_inputs, b.train_inputs)
    assert a.train_inputs.shape == (128, 2)
    assert a.test_inputs.shape == (32, 2)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        make_dataset("cifar", {}, seed=0)


# ---------------------------------------------------------------------------
# IDX format
# ---------------------------------------------------------------------------

def idx_images_bytes(n=3, rows=2, cols=2):
    body = bytes(range(n * rows * cols))
    return struct.pack(">IIII", 0x803, n, rows, cols) + body


def idx_labels_bytes(labels=(0, 1, 2)):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


def test_idx_roundtrip_small(tmp_path):
    img_path = tmp_path / "imgs"
    img_path.write_bytes(idx_images_bytes())
    images = read_idx_images(img_path)
    assert images.shape == (3, 4)
    assert images[0, 0] == 0.0
    assert images[2, 3] == pytest.approx(11 / 255)

    lbl_path = tmp_path / "lbls"
    lbl_path.write_bytes(idx_labels_bytes())
    assert np.array_equal(read_idx_labels(lbl_path), [0, 1, 2])


def test_idx_gzip_transparent(tmp_path):
    path = tmp_path / "imgs.gz"
    path.write_bytes(gzip.compress(idx_images_bytes()))
    assert read_idx_images(path).shape == (3, 4)


def test_idx_bad_magic_names_offset(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(struct.pack(">IIII", 0x804, 1, 2, 2) + bytes(4))
    with pytest.raises(FormatError, match="offset 0"):
        read_idx_images(path)
    with pytest.raises(FormatError, match="0x00000801"):
        read_idx_labels(path)


def test_idx_truncation_names_expected_size(tmp_path):
    path = tmp_path / "short"
    path.write_bytes(idx_images_bytes()[:-3])
    with pytest.raises(FormatError, match="expected 28"):
        read_idx_images(path)


def test_idx_truncated_header(tmp_path):
    path = tmp_path / "tiny"
    path.write_bytes(b"\x00\x00")
    with pytest.raises(FormatError, match="offset 0"):
        read_idx_images(path)


# ---------------------------------------------------------------------------
# MNIST subset
# ---------------------------------------------------------------------------

@needs_mnist
def test_mnist_subset_counts_and_scaling():
    data = make_dataset(
        "mnist-subset", {**MNIST_PARAMS, "classes": [0, 1], "cap_per_class": 500}
    )
    assert data.train_inputs.shape == (1000, 784)
    assert data.train_labels.shape == (1000,)
    assert set(np.unique(data.train_labels)) == {0, 1}
    assert np.bincount(data.train_labels).tolist() == [500, 500]
    assert data.train_inputs.min() >= 0.0
    assert data.train_inputs.max() <= 1.0
    # official test split: every 0 and 1 in the test files, uncapped
    raw_labels = read_idx_labels(MNIST_PARAMS["test_labels"])
    expected = int(np.sum((raw_labels == 0) | (raw_labels == 1)))
    assert data.test_inputs.shape == (expected, 784)


@needs_mnist
def test_mnist_subset_against_independent_header_read():
    # oracle: parse the IDX headers directly with struct
    raw = gzip.decompress(Path(MNIST_PARAMS["train_images"]).read_bytes())
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    assert magic == 0x803
    images = read_idx_images(MNIST_PARAMS["train_images"])
    assert images.shape == (n, rows * cols)
    # spot-check one pixel against the raw byte
    assert images[7, 203] == raw[16 + 7 * 784 + 203] / 255.0
