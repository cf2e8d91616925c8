#!/usr/bin/env python3
"""Carve a small two-class IDX subset out of the full MNIST files.

Writes bit-exact IDX files (gzipped) containing, in original file order,
the first N train images of each chosen class and every matching test
image. Loading the subset with cap_per_class <= N yields arrays identical
to loading the full files, so the subset can ship with the repository.

Usage: python scripts/make_mnist_pair_subset.py [--classes 0 1] [--cap 500]
"""

import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def read_idx(path: Path):
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    magic = struct.unpack_from(">I", raw)[0]
    if magic == 0x803:
        n, rows, cols = struct.unpack_from(">III", raw, 4)
        data = np.frombuffer(raw, np.uint8, n * rows * cols, 16).reshape(n, rows, cols)
        return data
    if magic == 0x801:
        n = struct.unpack_from(">I", raw, 4)[0]
        return np.frombuffer(raw, np.uint8, n, 8)
    raise ValueError(f"{path}: unknown magic 0x{magic:08x}")


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    payload = struct.pack(">IIII", 0x803, n, rows, cols) + images.tobytes()
    path.write_bytes(gzip.compress(payload, mtime=0))


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    payload = struct.pack(">II", 0x801, labels.shape[0]) + labels.astype(np.uint8).tobytes()
    path.write_bytes(gzip.compress(payload, mtime=0))


def select(images, labels, classes, cap):
    counts = {c: 0 for c in classes}
    keep = []
    for i, label in enumerate(labels):
        c = int(label)
        if c in counts and (cap is None or counts[c] < cap):
            counts[c] += 1
            keep.append(i)
    keep = np.asarray(keep, dtype=np.int64)
    return images[keep], labels[keep]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--source", default="data/mnist")
    parser.add_argument("--dest", default="data/mnist01")
    parser.add_argument("--classes", type=int, nargs="+", default=[0, 1])
    parser.add_argument("--cap", type=int, default=500)
    args = parser.parse_args()
    src, dest = Path(args.source), Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)

    train_x = read_idx(src / "train-images-idx3-ubyte.gz")
    train_y = read_idx(src / "train-labels-idx1-ubyte.gz")
    test_x = read_idx(src / "t10k-images-idx3-ubyte.gz")
    test_y = read_idx(src / "t10k-labels-idx1-ubyte.gz")

    tx, ty = select(train_x, train_y, set(args.classes), args.cap)
    vx, vy = select(test_x, test_y, set(args.classes), None)
    write_idx_images(dest / "train-images-idx3-ubyte.gz", tx)
    write_idx_labels(dest / "train-labels-idx1-ubyte.gz", ty)
    write_idx_images(dest / "t10k-images-idx3-ubyte.gz", vx)
    write_idx_labels(dest / "t10k-labels-idx1-ubyte.gz", vy)
    print(f"train subset: {tx.shape[0]} images, test subset: {vx.shape[0]} images -> {dest}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
