"""Dense float64 linear algebra helpers, activations, and seeded initialization.

Matrices and vectors are plain numpy float64 arrays in row-major (C) order.
Construction goes through the validators below, which reject non-finite
entries and wrong ranks outright. Randomness always flows through an
explicitly seeded PCG64 generator, so every draw in the package is
replayable bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

__all__ = [
    "make_rng",
    "spawn_rng",
    "as_matrix",
    "as_vector",
    "as_point_cloud",
    "relu",
    "he_init",
    "frobenius_norm_sq",
]

# Absolute slack used when checking the analytic inequalities.
INEQ_SLACK = 1e-9

# Segment/endpoint norms at or below this are treated as degenerate.
TINY = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: PCG64 keyed by the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent substream keyed by (seed, *stream).

    Used wherever one experiment needs several decoupled noise sources
    (init, shuffling, data synthesis) that must not share a stream.
    """
    return np.random.default_rng([int(seed)] + [int(s) for s in stream])


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validate a 2-D float64 array: finite entries, optional exact shape."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"expected {cols} cols, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix entries must be finite")
    return m


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Validate a 1-D float64 array: finite entries, optional exact length."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got ndim={v.ndim}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"expected dim {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise DimensionError("vector entries must be finite")
    return v


def as_point_cloud(values) -> np.ndarray:
    """Validate an (m, d) array of m points sharing one dimension d.

    The rows carry uniform weight 1/m; this is the package's empirical
    measure representation.
    """
    p = np.ascontiguousarray(values, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] == 0:
        raise DimensionError(f"expected a nonempty (m, d) point cloud, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DimensionError("point cloud entries must be finite")
    return p


def relu(v: np.ndarray) -> np.ndarray:
    """Componentwise max(0, x). Idempotent."""
    return np.maximum(v, 0.0)


def he_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian init with std sqrt(2/cols), the ReLU fan-in scaling."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"he_init needs rows, cols >= 1, got ({rows}, {cols})")
    return rng.normal(0.0, np.sqrt(2.0 / cols), size=(rows, cols))


def frobenius_norm_sq(m: np.ndarray) -> float:
    """Sum of squared entries."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.sum(m * m))
