"""Power-weighted minimal spanning tree length.

    L_gamma = min over spanning trees T of  sum_{e in T} |e|^gamma

x -> x**gamma is increasing for gamma > 0, so the minimizer is the ordinary
MST of the raw weights; the exponent is applied to the chosen edges only.
Tree totals are accumulated with ``math.fsum`` (correctly rounded), which
makes the result independent of edge order and therefore exactly
reproducible across the different tree algorithms and the oracle.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigurationError, DisconnectedGraphError, InputError
from .geodesics import GeodesicEdgeMatrix

METHODS = ("prim", "kruskal")
ORACLE_MAX_VERTICES = 8


@dataclass(frozen=True)
class MstResult:
    total_length: float
    gamma: float
    edges: list[tuple[int, int, float]]
    vertex_count: int


# ------------------------------------------------------------------ kernels


@numba.njit(cache=True, nogil=True)
def _prim(dist, idx):
    """Dense O(p^2) Prim over dist[idx][:, idx].

    Returns the parent of each local vertex (-1 for the root); all -1 past the
    root signals an unreachable vertex.  Ties go to the smaller local index.
    """
    p = idx.shape[0]
    parent = np.full(p, -1, np.int64)
    key = np.empty(p)
    done = np.zeros(p, np.bool_)
    done[0] = True
    r0 = idx[0]
    for v in range(1, p):
        key[v] = dist[r0, idx[v]]
        parent[v] = 0
    for _ in range(p - 1):
        best = np.inf
        u = -1
        for v in range(p):
            if not done[v] and key[v] < best:
                best = key[v]
                u = v
        if u < 0:
            parent[:] = -1
            return parent
        done[u] = True
        row = idx[u]
        for v in range(p):
            if not done[v]:
                w = dist[row, idx[v]]
                if w < key[v]:
                    key[v] = w
                    parent[v] = u
    return parent


@numba.njit(cache=True, nogil=True)
def _find(up, a):
    root = a
    while up[root] != root:
        root = up[root]
    while up[a] != root:
        nxt = up[a]
        up[a] = root
        a = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _kruskal(p, ei, ej, order):
    """Union-find scan of candidate edges in the given order.

    Returns a (p-1, 2) array of chosen local edges, or fewer rows if the
    candidates do not span.
    """
    up = np.arange(p)
    rank = np.zeros(p, np.int64)
    chosen = np.empty((max(p - 1, 0), 2), np.int64)
    count = 0
    for t in range(order.shape[0]):
        if count == p - 1:
            break
        e = order[t]
        a = _find(up, ei[e])
        b = _find(up, ej[e])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        up[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        chosen[count, 0] = ei[e]
        chosen[count, 1] = ej[e]
        count += 1
    return chosen[:count]


@numba.njit(cache=True, nogil=True)
def _cycle_property_holds(sub, tree_i, tree_j):
    """True iff every pair (u, v) has sub[u, v] >= the heaviest edge on the
    tree path u..v, i.e. the tree is an MST of the complete graph ``sub``."""
    p = sub.shape[0]
    head = np.full(p, -1, np.int64)
    nxt = np.empty(2 * (p - 1), np.int64)
    to = np.empty(2 * (p - 1), np.int64)
    for e in range(p - 1):
        a, b = tree_i[e], tree_j[e]
        to[2 * e] = b
        nxt[2 * e] = head[a]
        head[a] = 2 * e
        to[2 * e + 1] = a
        nxt[2 * e + 1] = head[b]
        head[b] = 2 * e + 1
    bottleneck = np.empty(p)
    seen = np.empty(p, np.bool_)
    stack = np.empty(p, np.int64)
    for root in range(p):
        seen[:] = False
        seen[root] = True
        bottleneck[root] = 0.0
        top = 0
        stack[0] = root
        while top >= 0:
            u = stack[top]
            top -= 1
            k = head[u]
            while k >= 0:
                v = to[k]
                if not seen[v]:
                    seen[v] = True
                    w = sub[u, v]
                    bottleneck[v] = w if w > bottleneck[u] else bottleneck[u]
                    top += 1
                    stack[top] = v
                k = nxt[k]
        for v in range(p):
            if sub[root, v] < bottleneck[v]:
                return False
    return True


@numba.njit(cache=True, nogil=True)
def _prim_points(x):
    """Euclidean MST of raw points, distances computed on the fly."""
    p, d = x.shape
    parent = np.full(p, -1, np.int64)
    key = np.full(p, np.inf)
    done = np.zeros(p, np.bool_)
    u = 0
    for _ in range(p - 1):
        done[u] = True
        best = np.inf
        nxt = -1
        for v in range(p):
            if done[v]:
                continue
            s = 0.0
            for c in range(d):
                t = x[u, c] - x[v, c]
                s += t * t
            w = np.sqrt(s)
            if w < key[v]:
                key[v] = w
                parent[v] = u
            if key[v] < best:
                best = key[v]
                nxt = v
        u = nxt
    key[0] = 0.0
    return parent, key


# --------------------------------------------------------------- front ends


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma > 0 or not math.isfinite(gamma):
        raise ConfigurationError(f"edge exponent gamma must be positive, got {gamma}")
    return gamma


def _as_dense(matrix) -> np.ndarray:
    if isinstance(matrix, GeodesicEdgeMatrix):
        return matrix.dist
    dist = np.asarray(matrix, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise InputError(f"edge matrix must be square, got shape {dist.shape}")
    if np.isnan(dist).any() or (dist < 0).any():
        raise InputError("edge matrix entries must be nonnegative numbers")
    return dist


def tree_length(weights, gamma: float) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return math.fsum((w if gamma == 1.0 else w**gamma).tolist())


def _result(dist, idx, ei, ej, gamma) -> MstResult:
    w = dist[idx[ei], idx[ej]]
    lo, hi = np.minimum(ei, ej), np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    edges = list(zip(lo[order].tolist(), hi[order].tolist(), w[order].tolist()))
    return MstResult(tree_length(w, gamma), gamma, edges, len(idx))


def _disconnected(p: int) -> DisconnectedGraphError:
    return DisconnectedGraphError(
        f"edge matrix over {p} vertices has unreachable pairs; the spanning tree is undefined"
    )


def _sorted_upper(sub: np.ndarray):
    p = sub.shape[0]
    ei, ej = np.triu_indices(p, 1)
    # triu order is (i, j)-lexicographic, so a stable sort on weight gives
    # the (weight, i, j) order
    order = np.argsort(sub[ei, ej], kind="stable")
    return ei, ej, order


def _kruskal_full(sub: np.ndarray):
    p = sub.shape[0]
    ei, ej, order = _sorted_upper(sub)
    chosen = _kruskal(p, ei, ej, order)
    if len(chosen) < p - 1 or not np.isfinite(sub[chosen[:, 0], chosen[:, 1]]).all():
        raise _disconnected(p)
    return chosen[:, 0], chosen[:, 1]


def _kruskal_pruned(sub: np.ndarray, r: int):
    """Kruskal on each vertex's r nearest candidates, certified against the
    full matrix; falls back to the full edge set when the candidate graph
    does not span or the certificate fails."""
    p = sub.shape[0]
    if r >= p - 1:
        return _kruskal_full(sub)
    masked = sub.copy()
    np.fill_diagonal(masked, np.inf)
    near = np.argpartition(masked, r - 1, axis=1)[:, :r]
    src = np.repeat(np.arange(p), r)
    dst = near.ravel()
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    key = np.unique(lo * p + hi)
    ei, ej = key // p, key % p
    w = sub[ei, ej]
    order = np.lexsort((ej, ei, w))
    chosen = _kruskal(p, ei, ej, order)
    if len(chosen) == p - 1 and np.isfinite(sub[chosen[:, 0], chosen[:, 1]]).all():
        if _cycle_property_holds(sub, chosen[:, 0].copy(), chosen[:, 1].copy()):
            return chosen[:, 0], chosen[:, 1]
    return _kruskal_full(sub)


def gmst_length(
    matrix,
    gamma: float = 1.0,
    *,
    indices=None,
    method: str = "prim",
    prune: int | None = None,
) -> MstResult:
    """Minimal spanning tree of a symmetric edge matrix, length sum |e|^gamma.

    ``indices`` selects a principal submatrix without copying it (equivalent
    to ``restrict``).  ``method`` picks dense Prim or Kruskal; ``prune=r``
    runs Kruskal on each vertex's r nearest neighbours with an exactness
    certificate.  All variants return the same total length.
    """
    gamma = _check_gamma(gamma)
    dist = _as_dense(matrix)
    idx = np.arange(dist.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
    p = len(idx)
    if p < 2:
        raise InputError(f"need at least 2 vertices, got {p}")
    if method not in METHODS:
        raise ConfigurationError(f"unknown MST method {method!r}")

    if prune is None and method == "prim":
        parent = _prim(dist, idx)
        if parent[1:].min() < 0:
            raise _disconnected(p)
        ej = np.arange(1, p)
        ei = parent[1:]
        if not np.isfinite(dist[idx[ei], idx[ej]]).all():
            raise _disconnected(p)
    else:
        sub = dist[np.ix_(idx, idx)] if indices is not None else dist
        if prune is not None:
            if prune < 1:
                raise ConfigurationError("prune must be a positive neighbour count")
            ei, ej = _kruskal_pruned(sub, int(prune))
        else:
            ei, ej = _kruskal_full(sub)
    return _result(dist, idx, ei, ej, gamma)


def _prufer_decode(seq: tuple[int, ...], p: int) -> list[tuple[int, int]]:
    degree = [1] * p
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = next(u for u in range(p) if degree[u] == 1)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (x for x in range(p) if degree[x] == 1)
    edges.append((u, w))
    return edges


def mst_oracle(matrix, gamma: float = 1.0) -> MstResult:
    """Exhaustive minimum over all p^(p-2) labelled spanning trees."""
    gamma = _check_gamma(gamma)
    dist = _as_dense(matrix)
    p = dist.shape[0]
    if p < 2:
        raise InputError(f"need at least 2 vertices, got {p}")
    if p > ORACLE_MAX_VERTICES:
        raise ConfigurationError(f"oracle enumeration refused for p={p} > {ORACLE_MAX_VERTICES}")
    if not np.isfinite(dist).all():
        raise _disconnected(p)

    best, best_edges = math.inf, None
    trees = [[(0, 1)]] if p == 2 else (_prufer_decode(s, p) for s in itertools.product(range(p), repeat=p - 2))
    for edges in trees:
        total = tree_length([dist[i, j] for i, j in edges], gamma)
        if total < best:
            best, best_edges = total, edges
    out = sorted((min(i, j), max(i, j), float(dist[i, j])) for i, j in best_edges)
    return MstResult(best, gamma, out, p)


def euclidean_mst_length(points: np.ndarray, gamma: float = 1.0) -> float:
    """L_gamma of the Euclidean MST of raw points (no distance matrix)."""
    gamma = _check_gamma(gamma)
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("need a (p, d) array with p >= 2")
    _, key = _prim_points(x)
    return tree_length(key[1:], gamma)


def estimate_beta(
    m: int,
    gamma: float = 1.0,
    n: int = 2048,
    trials: int = 32,
    seed: int = 0,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo BHH constant: mean of L_gamma / n^((m-gamma)/m) over
    uniform samples in [0,1]^m, with the standard error of that mean.

    Trial t draws from the stream seeded by (seed, m, n, t).
    """
    gamma = _check_gamma(gamma)
    if m < 2:
        raise ConfigurationError(f"need m >= 2, got {m}")
    if trials < 2:
        raise ConfigurationError(f"need at least 2 trials, got {trials}")
    if n < 2:
        raise ConfigurationError(f"need n >= 2, got {n}")
    norm = n ** ((m - gamma) / m)

    def one(t: int) -> float:
        rng = np.random.default_rng([seed, m, n, t])
        return euclidean_mst_length(rng.random((n, m)), gamma) / norm

    if threads == 1:
        vals = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            vals = list(pool.map(one, range(trials)))
    vals = np.asarray(vals)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(trials))
