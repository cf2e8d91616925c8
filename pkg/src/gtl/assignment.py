"""Exact linear assignment, discrete Wasserstein-2 distance, and the
optimal transport score.

The solver is a shortest-augmenting-path implementation with dual
potentials (the Jonker-Volgenant scheme), O(m^3) for an m x m cost
matrix. It is fully deterministic: columns are examined in ascending
index order and ties on tentative path length resolve toward the lowest
column index, so degenerate optima always yield the same permutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SizeError
from .numerics import as_point_cloud

__all__ = [
    "AssignmentResult",
    "squared_distance_costs",
    "brute_force_lap",
    "solve_lap",
    "wasserstein2",
    "ots",
]

BRUTE_FORCE_LIMIT = 9


@dataclass(frozen=True)
class AssignmentResult:
    """Optimal row-to-column permutation and its total cost."""

    permutation: np.ndarray  # permutation[i] = column assigned to row i
    total_cost: float


def _as_cost_matrix(cost) -> np.ndarray:
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise DimensionError(f"cost matrix must be square and nonempty, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DimensionError("cost matrix entries must be finite")
    return c


def squared_distance_costs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean costs c[i, j] = ||a_i - b_j||^2.

    Computed by direct differencing (not the expanded inner-product form)
    so entries are exact to rounding and never go negative.
    """
    a = as_point_cloud(a)
    b = as_point_cloud(b)
    if a.shape != b.shape:
        raise DimensionError(f"clouds must match in size and dim, got {a.shape} vs {b.shape}")
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def brute_force_lap(cost) -> AssignmentResult:
    """Exhaustive assignment oracle: scans all m! permutations.

    Ties break toward the lexicographically smallest permutation. Guarded
    to m <= 9 so the factorial stays tractable.
    """
    c = _as_cost_matrix(cost)
    m = c.shape[0]
    if m > BRUTE_FORCE_LIMIT:
        raise SizeError(f"brute force supports m <= {BRUTE_FORCE_LIMIT}, got {m}")
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.intp)
    totals = c[np.arange(m), perms].sum(axis=1)
    # argmin returns the first minimizer; itertools yields lexicographic order.
    best = int(np.argmin(totals))
    return AssignmentResult(permutation=perms[best].copy(), total_cost=float(totals[best]))


def solve_lap(cost) -> AssignmentResult:
    """Exact minimum-cost assignment via shortest augmenting paths.

    One Dijkstra-style search per row over reduced costs maintained by
    dual potentials u, v; every search ends in an unassigned column and
    the alternating path is flipped.
    """
    c = _as_cost_matrix(cost)
    m = c.shape[0]
    u = np.zeros(m)
    v = np.zeros(m)
    row_to_col = np.full(m, -1, dtype=np.intp)
    col_to_row = np.full(m, -1, dtype=np.intp)

    for cur in range(m):
        min_dist = np.full(m, np.inf)
        parent = np.full(m, -1, dtype=np.intp)
        visited = np.zeros(m, dtype=bool)
        scanned_rows = []
        i = cur
        dist_i = 0.0
        while True:
            scanned_rows.append(i)
            reduced = dist_i + c[i] - u[i] - v
            better = (reduced < min_dist) & ~visited
            min_dist[better] = reduced[better]
            parent[better] = i
            candidates = np.where(visited, np.inf, min_dist)
            j = int(np.argmin(candidates))  # lowest index wins ties
            dist_j = candidates[j]
            visited[j] = True
            if col_to_row[j] < 0:
                sink = j
                path_cost = dist_j
                break
            i = int(col_to_row[j])
            dist_i = dist_j

        u[cur] += path_cost
        for r in scanned_rows:
            if r != cur:
                u[r] += path_cost - min_dist[row_to_col[r]]
        v[visited] += min_dist[visited] - path_cost

        j = sink
        while True:
            i = int(parent[j])
            col_to_row[j] = i
            row_to_col[i], j = j, row_to_col[i]
            if i == cur:
                break

    total = float(c[np.arange(m), row_to_col].sum())
    return AssignmentResult(permutation=row_to_col, total_cost=total)


def wasserstein2(a, b) -> float:
    """Discrete W2 between two equal-size uniform point clouds.

    sqrt of the minimum mean squared pairing cost over all bijections.
    """
    ca = as_point_cloud(a)
    cb = as_point_cloud(b)
    if ca.shape != cb.shape:
        raise DimensionError(
            f"wasserstein2 needs equal size and dim, got {ca.shape} vs {cb.shape}"
        )
    result = solve_lap(squared_distance_costs(ca, cb))
    mean_cost = max(result.total_cost / ca.shape[0], 0.0)
    return float(np.sqrt(mean_cost))


def ots(inputs, outputs) -> float:
    """Fraction of index-paired samples whose optimal pairing is the identity.

    inputs[i] and outputs[i] must be a source point and its image under the
    map being scored. 1.0 means the map is itself a discrete optimal
    transport map between the two clouds; ties inherit the solver's
    deterministic permutation.
    """
    ci = as_point_cloud(inputs)
    co = as_point_cloud(outputs)
    if ci.shape != co.shape:
        raise DimensionError(f"ots needs equal size and dim, got {ci.shape} vs {co.shape}")
    result = solve_lap(squared_distance_costs(ci, co))
    fixed = int(np.sum(result.permutation == np.arange(ci.shape[0])))
    return fixed / ci.shape[0]
