"""k-nearest-neighbor graphs and fixed-radius neighbor counting.

Two kNN builders share one output type: :func:`knn_exact` (brute force,
deterministic tie-breaking by index) and :func:`knn_nndescent` (seeded
NN-Descent). :func:`knn_graph` picks between them. Distances are
Euclidean and accumulated feature by feature left to right, so
``d(a, b) == d(b, a)`` bit for bit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

SMALL_N = 256
KD_TREE_MAX_DIM = 32
EXACT_MAX_PAIRS_POINTS = 4096
SAMPLED_PAIRS = 1_000_000


@dataclass(frozen=True)
class NeighborGraph:
    """Per-point neighbor lists sorted by ascending distance (self excluded)."""

    indices: np.ndarray
    distances: np.ndarray
    exact: bool = False

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]


def _as_points(data) -> np.ndarray:
    values = getattr(data, "values", data)
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D point set, got shape {x.shape}")
    return x


def _check_k(k: int, n: int) -> None:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points N={n}")


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True, fastmath=False)
def _sqdist(x, a, b):
    acc = 0.0
    for f in range(x.shape[1]):
        diff = x[a, f] - x[b, f]
        acc += diff * diff
    return acc


@numba.njit(cache=True)
def _worse(d1, j1, d2, j2):
    # (d1, j1) ranks after (d2, j2)
    return d1 > d2 or (d1 == d2 and j1 > j2)


@numba.njit(cache=True)
def _sift_down(idx, dist, flag, d, j, fl):
    # replace the root of a max-heap keyed on (dist, idx) and restore order
    size = idx.shape[0]
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        if left >= size:
            break
        if right < size and _worse(dist[right], idx[right], dist[left], idx[left]):
            child = right
        else:
            child = left
        if _worse(dist[child], idx[child], d, j):
            idx[pos] = idx[child]
            dist[pos] = dist[child]
            flag[pos] = flag[child]
            pos = child
        else:
            break
    idx[pos] = j
    dist[pos] = d
    flag[pos] = fl


@numba.njit(cache=True)
def _heap_push(idx, dist, flag, d, j, fl):
    if not _worse(dist[0], idx[0], d, j):
        return 0
    for t in range(idx.shape[0]):
        if idx[t] == j:
            return 0
    _sift_down(idx, dist, flag, d, j, fl)
    return 1


@numba.njit(cache=True)
def _exact_kernel(x, k, out_idx, out_dist):
    n = x.shape[0]
    flag = np.zeros(k, dtype=np.uint8)
    for i in range(n):
        idx = out_idx[i]
        dist = out_dist[i]
        for j in range(n):
            if j == i:
                continue
            d = _sqdist(x, i, j)
            if _worse(dist[0], idx[0], d, j):
                _sift_down(idx, dist, flag, d, j, 0)


@numba.njit(cache=True)
def _seed_heaps(x, heap_idx, heap_dist, heap_flag, init_idx):
    n = x.shape[0]
    for i in range(n):
        for t in range(init_idx.shape[1]):
            j = init_idx[i, t]
            if j < 0 or j == i:
                continue
            d = _sqdist(x, i, j)
            _heap_push(heap_idx[i], heap_dist[i], heap_flag[i], d, j, 1)


@numba.njit(cache=True)
def _cand_push(idx, pri, j, p):
    # keep the entries with smallest priority; max-heap on priority at root
    if p >= pri[0]:
        return
    for t in range(idx.shape[0]):
        if idx[t] == j:
            return
    size = idx.shape[0]
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        if left >= size:
            break
        if right < size and pri[right] > pri[left]:
            child = right
        else:
            child = left
        if pri[child] > p:
            idx[pos] = idx[child]
            pri[pos] = pri[child]
            pos = child
        else:
            break
    idx[pos] = j
    pri[pos] = p


@numba.njit(cache=True)
def _build_candidates(heap_idx, heap_flag, prio, new_idx, old_idx):
    n, k = heap_idx.shape
    m = new_idx.shape[1]
    new_pri = np.full((n, m), np.inf)
    old_pri = np.full((n, m), np.inf)
    for i in range(n):
        for t in range(k):
            j = heap_idx[i, t]
            if j < 0:
                continue
            p = prio[i, t]
            if heap_flag[i, t]:
                _cand_push(new_idx[i], new_pri[i], j, p)
                _cand_push(new_idx[j], new_pri[j], i, p)
            else:
                _cand_push(old_idx[i], old_pri[i], j, p)
                _cand_push(old_idx[j], old_pri[j], i, p)
    # sampled new entries become old for the next round
    for i in range(n):
        for t in range(k):
            if heap_flag[i, t]:
                j = heap_idx[i, t]
                for s in range(m):
                    if new_idx[i, s] == j:
                        heap_flag[i, t] = 0
                        break


@numba.njit(cache=True)
def _local_join(x, heap_idx, heap_dist, heap_flag, new_idx, old_idx):
    n = x.shape[0]
    m = new_idx.shape[1]
    updates = 0
    for i in range(n):
        for a in range(m):
            p = new_idx[i, a]
            if p < 0:
                continue
            for b in range(a + 1, m):
                q = new_idx[i, b]
                if q < 0 or q == p:
                    continue
                d = _sqdist(x, p, q)
                updates += _heap_push(heap_idx[p], heap_dist[p], heap_flag[p], d, q, 1)
                updates += _heap_push(heap_idx[q], heap_dist[q], heap_flag[q], d, p, 1)
            for b in range(m):
                q = old_idx[i, b]
                if q < 0 or q == p:
                    continue
                d = _sqdist(x, p, q)
                updates += _heap_push(heap_idx[p], heap_dist[p], heap_flag[p], d, q, 1)
                updates += _heap_push(heap_idx[q], heap_dist[q], heap_flag[q], d, p, 1)
    return updates


@numba.njit(cache=True)
def _row_sqdists(x, rows, cols):
    out = np.empty(cols.shape, dtype=np.float64)
    for i in range(cols.shape[0]):
        for t in range(cols.shape[1]):
            out[i, t] = _sqdist(x, rows[i], cols[i, t])
    return out


def _finalize(heap_idx: np.ndarray, heap_sq: np.ndarray, exact: bool) -> NeighborGraph:
    order = np.lexsort((heap_idx, heap_sq), axis=-1)
    idx = np.take_along_axis(heap_idx, order, axis=1).astype(np.int64)
    sq = np.take_along_axis(heap_sq, order, axis=1)
    return NeighborGraph(idx, np.sqrt(sq), exact)


# ---------------------------------------------------------------------------
# public kNN API
# ---------------------------------------------------------------------------


def knn_exact(data, k: int) -> NeighborGraph:
    """Brute-force kNN; equal distances are ordered by ascending index."""
    x = _as_points(data)
    n = x.shape[0]
    _check_k(k, n)
    idx = np.full((n, k), -1, dtype=np.int64)
    sq = np.full((n, k), np.inf)
    _exact_kernel(x, k, idx, sq)
    return _finalize(idx, sq, exact=True)


def knn_nndescent(
    data,
    k: int,
    seed: int = 0,
    max_rounds: int = 10,
    sample_rate: float = 0.5,
    delta: float = 0.001,
    init: Optional[NeighborGraph] = None,
) -> NeighborGraph:
    """Approximate kNN graph by NN-Descent with random initialisation.

    Parameters
    ----------
    data : array-like or Dataset, shape (N, d)
    k : int
        Neighbors per point, ``k < N``.
    seed : int
        Determines the random initial graph and candidate sampling.
    max_rounds : int
        Upper bound on refinement rounds.
    sample_rate : float
        Fraction of each neighbor list sampled as join candidates per round.
    delta : float
        Stop once fewer than ``delta * N * k`` heap entries change in a round.
    init : NeighborGraph, optional
        Warm start, e.g. the graph from the previous mean-shift iteration.
        Its neighbor lists seed the heaps (distances are recomputed on
        ``data``) before the random fill.
    """
    x = _as_points(data)
    n = x.shape[0]
    _check_k(k, n)
    rng = np.random.default_rng(seed)

    heap_idx = np.full((n, k), -1, dtype=np.int64)
    heap_sq = np.full((n, k), np.inf)
    heap_flag = np.zeros((n, k), dtype=np.uint8)

    if init is not None and init.n_points == n:
        _seed_heaps(x, heap_idx, heap_sq, heap_flag, np.ascontiguousarray(init.indices[:, :k]))
    n_random = k if init is None else max(1, k // 4)
    rand = rng.integers(0, n, size=(n, n_random))
    _seed_heaps(x, heap_idx, heap_sq, heap_flag, rand)
    # random draws can collide; top up any unfilled slots deterministically
    short = np.flatnonzero((heap_idx < 0).any(axis=1))
    while short.size:
        extra = np.full((n, k), -1, dtype=np.int64)
        extra[short] = rng.integers(0, n, size=(short.size, k))
        _seed_heaps(x, heap_idx, heap_sq, heap_flag, extra)
        short = np.flatnonzero((heap_idx < 0).any(axis=1))

    max_cand = max(1, int(math.ceil(sample_rate * k)))
    threshold = delta * n * k
    for rnd in range(max_rounds):
        prio = rng.random((n, k))
        new_idx = np.full((n, max_cand), -1, dtype=np.int64)
        old_idx = np.full((n, max_cand), -1, dtype=np.int64)
        _build_candidates(heap_idx, heap_flag, prio, new_idx, old_idx)
        updates = _local_join(x, heap_idx, heap_sq, heap_flag, new_idx, old_idx)
        logger.debug("nndescent round %d: %d updates", rnd, updates)
        if updates <= threshold:
            break
    return _finalize(heap_idx, heap_sq, exact=False)


def use_exact(n: int, k: int) -> bool:
    """Small-N rule: NN-Descent overhead is not worth it for tiny or dense graphs."""
    return n <= SMALL_N or k >= n / 4


def knn_graph(data, k: int, seed: int = 0, init: Optional[NeighborGraph] = None,
              max_rounds: int = 10, sample_rate: float = 0.5) -> NeighborGraph:
    x = _as_points(data)
    _check_k(k, x.shape[0])
    if use_exact(x.shape[0], k):
        return knn_exact(x, k)
    return knn_nndescent(x, k, seed=seed, max_rounds=max_rounds,
                         sample_rate=sample_rate, init=init)


def recall(approx: NeighborGraph, exact: NeighborGraph) -> float:
    """Fraction of true neighbor entries recovered by ``approx``."""
    hits = 0
    for a, e in zip(approx.indices, exact.indices):
        hits += np.intersect1d(a, e, assume_unique=True).size
    return hits / exact.indices.size


# ---------------------------------------------------------------------------
# range counting
# ---------------------------------------------------------------------------


class RangeCounter:
    """Counts stored points strictly within a radius of a query.

    Low-dimensional dense points go into a KD-tree. High-dimensional or
    sparse points (fuzzy similarity rows have one coordinate per batch
    member) use blocked brute force through the Gram expansion
    ``|a-b|^2 = |a|^2 + |b|^2 - 2 a.b``, which keeps sparse rows sparse.
    """

    block_rows = 512

    def __init__(self, points):
        if sp.issparse(points):
            self.points = sp.csr_matrix(points, dtype=np.float64)
            self.sparse = True
        else:
            self.points = _as_points(points)
            self.sparse = False
        self.n_points, self.dim = self.points.shape
        self.tree = None
        if not self.sparse and self.dim <= KD_TREE_MAX_DIM:
            self.tree = cKDTree(self.points)
        else:
            if self.sparse:
                self.sqnorms = np.asarray(self.points.multiply(self.points).sum(axis=1)).ravel()
            else:
                self.sqnorms = np.einsum("ij,ij->i", self.points, self.points)

    def _query_distances(self, query: np.ndarray) -> np.ndarray:
        if self.sparse:
            q = np.asarray(query, dtype=np.float64).ravel()
            dots = self.points @ q
            sq = self.sqnorms + q @ q - 2.0 * dots
            return np.sqrt(np.maximum(sq, 0.0))
        diff = self.points - query
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def count(self, query, radius: float) -> int:
        query = np.asarray(query, dtype=np.float64).ravel()
        if query.shape[0] != self.dim:
            raise ValueError(f"query has dimension {query.shape[0]}, counter has {self.dim}")
        if radius < 0:
            raise ValueError(f"radius must be nonnegative, got {radius}")
        if radius == 0:
            return 0
        if self.tree is not None:
            return int(self.tree.query_ball_point(query, np.nextafter(radius, 0.0),
                                                  return_length=True))
        return int(np.count_nonzero(self._query_distances(query) < radius))

    def _blocks(self):
        """Yield (row slice, distance block) over the stored points vs themselves."""
        pts = self.points
        for start in range(0, self.n_points, self.block_rows):
            stop = min(start + self.block_rows, self.n_points)
            if self.sparse:
                dots = (pts[start:stop] @ pts.T).toarray()
            else:
                dots = pts[start:stop] @ pts.T
            sq = self.sqnorms[start:stop, None] + self.sqnorms[None, :] - 2.0 * dots
            np.maximum(sq, 0.0, out=sq)
            rows = np.arange(stop - start)
            sq[rows, rows + start] = 0.0
            yield slice(start, stop), np.sqrt(sq)

    def count_all(self, radii) -> np.ndarray:
        """Counts for every stored point as query, one column per radius."""
        radii = np.atleast_1d(np.asarray(radii, dtype=np.float64))
        out = np.zeros((self.n_points, radii.size), dtype=np.int64)
        if self.tree is not None:
            for c, r in enumerate(radii):
                if r > 0:
                    out[:, c] = self.tree.query_ball_point(
                        self.points, np.nextafter(r, 0.0), return_length=True)
            return out
        for rows, dist in self._blocks():
            for c, r in enumerate(radii):
                out[rows, c] = np.count_nonzero(dist < r, axis=1)
        return out

    def kth_distance(self, kk: int) -> np.ndarray:
        """Distance from each stored point to its ``kk``-th closest stored point.

        The point itself counts as the first (distance 0), so
        ``count(p_i, r) >= kk`` exactly when ``kth_distance(kk)[i] < r``.
        """
        if not 1 <= kk <= self.n_points:
            raise ValueError(f"kk must lie in [1, {self.n_points}], got {kk}")
        if self.tree is not None:
            d, _ = self.tree.query(self.points, k=[kk])
            return d[:, 0]
        out = np.empty(self.n_points)
        for rows, dist in self._blocks():
            out[rows] = np.partition(dist, kk - 1, axis=1)[:, kk - 1]
        return out

    def max_distance(self) -> float:
        if self.tree is not None:
            return max_pairwise_distance(self.points)
        best = 0.0
        for _, dist in self._blocks():
            best = max(best, float(dist.max()))
        return best


def range_count(counter: RangeCounter, query, radius: float) -> int:
    return counter.count(query, radius)


def max_pairwise_distance(points, seed: int = 0) -> float:
    """Largest Euclidean distance between two points.

    Exact up to 4096 points; beyond that the maximum over a seeded sample of
    one million pairs.
    """
    if sp.issparse(points):
        m = points.shape[0]
        if m < 2:
            raise ValueError("need at least 2 points")
        if m <= EXACT_MAX_PAIRS_POINTS:
            return RangeCounter(points).max_distance()
        pts = sp.csr_matrix(points)
        rng = np.random.default_rng(seed)
        a = rng.integers(0, m, SAMPLED_PAIRS)
        b = rng.integers(0, m, SAMPLED_PAIRS)
        diff = pts[a] - pts[b]
        return float(np.sqrt(np.asarray(diff.multiply(diff).sum(axis=1)).max()))

    x = _as_points(points)
    m = x.shape[0]
    if m < 2:
        raise ValueError("need at least 2 points")
    if m <= EXACT_MAX_PAIRS_POINTS:
        if x.shape[1] > KD_TREE_MAX_DIM:
            return RangeCounter(x).max_distance()
        step = max(1, (1 << 22) // (m * x.shape[1]))
        best = 0.0
        for start in range(0, m, step):
            diff = x[start:start + step, None, :] - x[None, :, :]
            best = max(best, float(np.einsum("ijk,ijk->ij", diff, diff).max()))
        return math.sqrt(best)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, m, SAMPLED_PAIRS)
    b = rng.integers(0, m, SAMPLED_PAIRS)
    diff = x[a] - x[b]
    return float(np.sqrt(np.einsum("ij,ij->i", diff, diff).max()))
