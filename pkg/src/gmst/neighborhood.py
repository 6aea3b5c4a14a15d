"""Euclidean neighborhood graphs (epsilon-rule / symmetrized k-rule) and the
conformal edge rescaling w(i,j) / sqrt(M(i) M(j))."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .datasets import PointCloud
from .errors import ConfigurationError, DegenerateInputError

# rows of the brute-force distance matrix held in memory at once
_BLOCK_BYTES = 64 * 2**20


@dataclass(frozen=True)
class NeighborRule:
    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "epsilon":
            if not self.value > 0:
                raise ConfigurationError(f"epsilon radius must be positive, got {self.value}")
        elif self.kind == "knn":
            if int(self.value) != self.value or self.value < 1:
                raise ConfigurationError(f"k must be a positive integer, got {self.value}")
            object.__setattr__(self, "value", int(self.value))
        else:
            raise ConfigurationError(f"unknown neighbor rule {self.kind!r}")

    @classmethod
    def epsilon(cls, radius: float) -> NeighborRule:
        return cls("epsilon", float(radius))

    @classmethod
    def knn(cls, k: int) -> NeighborRule:
        return cls("knn", k)

    def check(self, n: int) -> None:
        if self.kind == "knn" and self.value > n - 1:
            raise ConfigurationError(f"k={self.value} needs at least k+1 points, got n={n}")

    def __str__(self) -> str:
        return f"{self.kind}({self.value})"


@dataclass(frozen=True, eq=False)
class NeighborhoodGraph:
    """Undirected weighted graph, edges stored as parallel arrays with i < j
    in lexicographic order.

    ``mean_neighbor_dist`` is M(i), the mean Euclidean length of the edges
    incident to i (NaN for isolated vertices).  It always refers to the
    unrescaled graph.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    rule: NeighborRule
    mean_neighbor_dist: np.ndarray
    rescaled: bool = False
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_edges(cls, n: int, edges, rule: NeighborRule | None = None) -> NeighborhoodGraph:
        """Graph from explicit (i, j, weight) triples; i != j, no repeated pairs."""
        arr = np.asarray(list(edges), dtype=np.float64).reshape(-1, 3)
        i, j = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
        w = arr[:, 2].copy()
        if np.any(i == j) or (len(i) and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n)):
            raise ConfigurationError("edges must join two distinct in-range vertices")
        if np.any(w < 0):
            raise ConfigurationError("edge weights must be nonnegative")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if len(np.unique(lo * n + hi)) != len(lo):
            raise ConfigurationError("repeated edge")
        mean = _mean_incident(n, lo, hi, w)
        return cls(n, lo, hi, w, rule, mean, False, {})

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))

    @property
    def degree(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n) + np.bincount(self.cols, minlength=self.n)

    def to_sparse(self) -> csr_matrix:
        """Symmetric CSR adjacency; explicit zeros are kept as zero-length edges."""
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.weights, self.weights])
        return coo_matrix((w, (r, c)), shape=(self.n, self.n)).tocsr()


def _block_rows(n: int) -> int:
    return max(1, min(n, _BLOCK_BYTES // (8 * n)))


def _knn_brute(x: np.ndarray, k: int) -> np.ndarray:
    n = x.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    step = _block_rows(n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        dist = cdist(x[start:stop], x)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort: equal distances keep ascending index order
        out[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


def _knn_tree(x: np.ndarray, k: int) -> np.ndarray:
    n = x.shape[0]
    q = min(n, k + 6)
    tree = cKDTree(x)
    _, cand = tree.query(x, k=q)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        c = cand[i]
        c = c[c != i]
        d = cdist(x[i : i + 1], x[c])[0]
        order = np.lexsort((c, d))
        c, d = c[order], d[order]
        if q < n and not d[k - 1] < d[-1] * (1.0 - 1e-12):
            # tie (or near tie) at the k-th distance may extend past the candidates
            row = cdist(x[i : i + 1], x)[0]
            row[i] = np.inf
            out[i] = np.argsort(row, kind="stable")[:k]
        else:
            out[i] = c[:k]
    return out


def _epsilon_pairs(x: np.ndarray, eps: float, fast: bool) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    if fast:
        pairs = cKDTree(x).query_pairs(eps * (1.0 + 1e-9), output_type="ndarray")
        if len(pairs) == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        i, j = pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)
        i, j = np.minimum(i, j), np.maximum(i, j)
        keep = _pair_lengths(x, i, j) <= eps
        return i[keep], j[keep]
    ii, jj = [], []
    step = _block_rows(n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        dist = cdist(x[start:stop], x)
        r, c = np.nonzero(dist <= eps)
        r = r + start
        upper = c > r
        ii.append(r[upper])
        jj.append(c[upper])
    return np.concatenate(ii), np.concatenate(jj)


def _pair_lengths(x: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Euclidean lengths computed exactly as cdist does, one row at a time."""
    out = np.empty(len(i))
    if len(i) == 0:
        return out
    order = np.argsort(i, kind="stable")
    bounds = np.flatnonzero(np.diff(i[order])) + 1
    for grp in np.split(order, bounds):
        out[grp] = cdist(x[i[grp[0]] : i[grp[0]] + 1], x[j[grp]])[0]
    return out


def _mean_incident(n: int, rows, cols, weights) -> np.ndarray:
    deg = np.bincount(rows, minlength=n) + np.bincount(cols, minlength=n)
    total = np.bincount(rows, weights=weights, minlength=n) + np.bincount(cols, weights=weights, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(deg > 0, total / np.maximum(deg, 1), np.nan)


def build_graph(cloud: PointCloud, rule: NeighborRule, fast: bool = False) -> NeighborhoodGraph:
    """Connect each point to its k nearest neighbours (union over both
    endpoints) or to every point within radius epsilon.

    Ties in the k-rule go to the smaller index.  ``fast`` uses a k-d tree to
    prune the search; the edge set and weights are the same as brute force.
    """
    x = cloud.points
    n = cloud.n
    rule.check(n)

    if rule.kind == "knn":
        nbrs = (_knn_tree if fast else _knn_brute)(x, rule.value)
        src = np.repeat(np.arange(n, dtype=np.int64), rule.value)
        dst = nbrs.ravel()
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        key = np.unique(lo * n + hi)
        rows, cols = key // n, key % n
    else:
        rows, cols = _epsilon_pairs(x, rule.value, fast)
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]

    weights = _pair_lengths(x, rows, cols)
    mean = _mean_incident(n, rows, cols, weights)
    zero = int(np.count_nonzero(weights == 0.0))
    diagnostics = {"zero_weight_edges": zero, "isolated_vertices": int(np.count_nonzero(np.isnan(mean)))}
    for arr in (rows, cols, weights, mean):
        arr.setflags(write=False)
    return NeighborhoodGraph(n, rows, cols, weights, rule, mean, False, diagnostics)


def rescale_conformal(graph: NeighborhoodGraph) -> NeighborhoodGraph:
    """Replace every weight w(i,j) by w(i,j) / sqrt(M(i) M(j))."""
    if graph.rescaled:
        raise ConfigurationError("graph is already conformally rescaled")
    m = graph.mean_neighbor_dist
    bad = np.flatnonzero(~(m > 0))
    if len(bad):
        v = int(bad[0])
        what = "has no neighbours" if np.isnan(m[v]) else "coincides with all its neighbours (M=0)"
        raise DegenerateInputError(f"cannot rescale: vertex {v} {what}")
    w = graph.weights / np.sqrt(m[graph.rows] * m[graph.cols])
    w.setflags(write=False)
    return replace(graph, weights=w, rescaled=True)


def dump_edges(graph: NeighborhoodGraph, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("i,j,weight\n")
        for i, j, w in zip(graph.rows.tolist(), graph.cols.tolist(), graph.weights.tolist()):
            fh.write(f"{i},{j},{w!r}\n")
