"""Tracks, line-shape metrics, geodesic interpolation, and the pairwise
separation bound.

A track is the ordered sequence of one sample's representations through a
fixed-width stage of a network. The two straightness metrics differ in
what they forgive: the length ratio is blind to step-size imbalance only
when steps stay collinear, while the score normalizes every segment to
unit length first and so measures direction changes alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTrackError, DimensionError
from .numerics import TINY, as_point_cloud

__all__ = [
    "Track",
    "lsr",
    "lss",
    "track_distance",
    "separation_bound",
    "geodesic_interpolate",
    "optimal_velocity",
    "track_action",
    "straight_line_track",
]


@dataclass(frozen=True)
class Track:
    """States x(0)..x(n) of one sample, as an (n+1, dim) float64 array."""

    states: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(self.states, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] == 0:
            raise DimensionError(f"track needs >= 2 states of dim >= 1, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise DimensionError("track states must be finite")
        object.__setattr__(self, "states", s)

    @property
    def n_segments(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def _segment_norms(t: Track) -> np.ndarray:
    return np.linalg.norm(np.diff(t.states, axis=0), axis=1)


def lsr(t: Track) -> float:
    """Polyline length over chord length; >= 1, and 1 only for monotone
    straight tracks."""
    chord = float(np.linalg.norm(t.states[-1] - t.states[0]))
    if chord <= TINY:
        raise DegenerateTrackError("track endpoints coincide; length ratio undefined")
    return float(_segment_norms(t).sum() / chord)


def lss(t: Track) -> float:
    """Straightness after normalizing each segment to unit length.

    Segments with norm <= 1e-12 are dropped and the segment count reduced
    accordingly (deep residual stages late in training produce near-zero
    residues). Always >= 1; equals 1 exactly when every kept segment
    points the same way.
    """
    deltas = np.diff(t.states, axis=0)
    norms = np.linalg.norm(deltas, axis=1)
    keep = norms > TINY
    n_kept = int(keep.sum())
    if n_kept == 0:
        raise DegenerateTrackError("all segments degenerate; line-shape score undefined")
    units = deltas[keep] / norms[keep, None]
    chord = float(np.linalg.norm(units.sum(axis=0)))
    if chord == 0.0:
        return float("inf")  # exactly self-cancelling directions
    return n_kept / chord


def track_distance(a: Track, b: Track) -> float:
    """Minimum distance between same-index states of two tracks."""
    if a.states.shape != b.states.shape:
        raise DimensionError(
            f"tracks must share shape, got {a.states.shape} vs {b.states.shape}"
        )
    return float(np.linalg.norm(a.states - b.states, axis=1).min())


def separation_bound(xp, xq, txp, txq) -> float:
    """Lower bound on how close two straight-line interpolations can get.

    For particles moving from xp to txp and xq to txq along straight
    segments (with a monotone pairing), the minimum over time of their
    distance is at least

        ||xp - xq|| * ||txp - txq|| / sqrt(||xp - xq||^2 + ||txp - txq||^2).

    Returns 0 when both difference norms are <= 1e-12 (the bound is then
    vacuous but well defined).
    """
    xp = np.asarray(xp, dtype=np.float64)
    xq = np.asarray(xq, dtype=np.float64)
    txp = np.asarray(txp, dtype=np.float64)
    txq = np.asarray(txq, dtype=np.float64)
    if not (xp.shape == xq.shape == txp.shape == txq.shape):
        raise DimensionError("separation_bound needs four vectors of one dimension")
    a = float(np.linalg.norm(xp - xq))
    b = float(np.linalg.norm(txp - txq))
    if a <= TINY and b <= TINY:
        return 0.0
    return a * b / float(np.sqrt(a * a + b * b))


def geodesic_interpolate(sources, targets, t: float) -> np.ndarray:
    """Pointwise interpolation (1-t)*x + t*T(x) of a paired cloud.

    t=0 returns the sources exactly and t=1 the targets.
    """
    src = as_point_cloud(sources)
    tgt = as_point_cloud(targets)
    if src.shape != tgt.shape:
        raise DimensionError(f"paired clouds must match, got {src.shape} vs {tgt.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {t}")
    if t == 0.0:
        return src.copy()
    if t == 1.0:
        return tgt.copy()
    return (1.0 - t) * src + t * tgt


def optimal_velocity(source, target) -> np.ndarray:
    """Velocity T(x) - x of a particle crossing its geodesic segment.

    Constant in time for the discrete pairing: x + 1 * velocity = T(x).
    """
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if src.shape != tgt.shape:
        raise DimensionError(f"pair dims must match, got {src.shape} vs {tgt.shape}")
    return tgt - src


def track_action(t: Track) -> tuple[float, float]:
    """(length, energy): sum of segment norms and sum of squared norms."""
    norms = _segment_norms(t)
    return float(norms.sum()), float(np.sum(norms * norms))


def straight_line_track(x0, xn, n: int) -> Track:
    """Equally spaced states on the segment from x0 to xn.

    The unique minimizer of segment energy among all n-segment tracks with
    these endpoints; both straightness metrics evaluate to 1 on it.
    """
    if n < 1:
        raise ValueError(f"need at least one segment, got n={n}")
    a = np.asarray(x0, dtype=np.float64)
    b = np.asarray(xn, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("endpoints must be vectors of one dimension")
    states = np.empty((n + 1, a.shape[0]))
    for l in range(n + 1):
        states[l] = (l * b + (n - l) * a) / n
    states[0] = a  # endpoints exact regardless of rounding
    states[n] = b
    return Track(states)
