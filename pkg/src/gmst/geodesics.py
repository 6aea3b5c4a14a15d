"""All-pairs shortest paths through the neighborhood graph.

Unreachable pairs hold ``inf``; callers inspect ``connected`` and
``component_id`` rather than relying on a sentinel value.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import InputError
from .neighborhood import NeighborhoodGraph


@dataclass(frozen=True, eq=False)
class GeodesicEdgeMatrix:
    dist: np.ndarray
    component_id: np.ndarray

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def connected(self) -> bool:
        return self.n == 0 or int(self.component_id.max()) == 0

    def component_sizes(self) -> np.ndarray:
        return np.bincount(self.component_id)

    def largest_component(self) -> np.ndarray:
        """Indices of the largest component (lowest label wins ties)."""
        label = int(np.argmax(self.component_sizes()))
        return np.flatnonzero(self.component_id == label)


def _freeze(dist: np.ndarray, labels: np.ndarray) -> GeodesicEdgeMatrix:
    dist.setflags(write=False)
    labels.setflags(write=False)
    return GeodesicEdgeMatrix(dist, labels)


def all_pairs_geodesics(graph: NeighborhoodGraph) -> GeodesicEdgeMatrix:
    """Dijkstra from every vertex over the sparse graph."""
    adj = graph.to_sparse()
    dist = shortest_path(adj, method="D", directed=False)
    # the two directions sum the same path in opposite orders; make it exact
    dist = np.minimum(dist, dist.T)
    _, labels = connected_components(adj, directed=False)
    # scipy labels components in order of their smallest vertex
    return _freeze(np.ascontiguousarray(dist), labels.astype(np.int64))


def floyd_warshall_oracle(graph: NeighborhoodGraph) -> np.ndarray:
    """Dense O(n^3) reference; independent of the scipy path."""
    n = graph.n
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, j, w in zip(graph.rows, graph.cols, graph.weights):
        if w < dist[i, j]:
            dist[i, j] = dist[j, i] = w
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def restrict(matrix: GeodesicEdgeMatrix, indices) -> GeodesicEdgeMatrix:
    """Principal submatrix; entries keep their full-graph path lengths."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise InputError("indices must be one-dimensional")
    if len(idx) and (idx.min() < 0 or idx.max() >= matrix.n):
        raise InputError(f"index out of range for n={matrix.n}")
    if len(np.unique(idx)) != len(idx):
        raise InputError("indices must be distinct")
    sub = matrix.dist[np.ix_(idx, idx)]
    _, relabel = np.unique(matrix.component_id[idx], return_inverse=True)
    return _freeze(sub, relabel.astype(np.int64))


def dump_matrix(matrix: GeodesicEdgeMatrix, path: str | Path) -> None:
    with open(path, "w") as fh:
        for row in matrix.dist:
            fh.write(",".join("inf" if not np.isfinite(v) else repr(float(v)) for v in row))
            fh.write("\n")
