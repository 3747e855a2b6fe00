"""Fuzzy neighborhood graph over a batch of points.

Only the graph-construction stage of UMAP is reproduced: per-point
smooth-kNN calibration of an exponential kernel followed by the
probabilistic fuzzy union. No embedding is computed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .neighbors import NeighborGraph, knn_graph

SIGMA_LO = 1e-12
SIGMA_HI = 1e6
SIGMA_ITERS = 64
SUM_TOLERANCE = 1e-5


@dataclass(frozen=True)
class FuzzyGraph:
    memberships: sp.csr_matrix
    rho: np.ndarray
    sigma: np.ndarray
    k_graph: int
    knn: NeighborGraph

    @property
    def n_points(self) -> int:
        return self.memberships.shape[0]

    def dense(self) -> np.ndarray:
        return self.memberships.toarray()


def _kernel_sums(dist: np.ndarray, rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    excess = np.maximum(dist - rho[:, None], 0.0)
    return np.exp(-excess / sigma[:, None]).sum(axis=1)


def calibrate_rows(distances: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`smooth_knn_calibrate` over the rows of ``distances``."""
    dist = np.asarray(distances, dtype=np.float64)
    if dist.ndim != 2:
        raise ValueError("distances must be 2-D (one sorted row per point)")
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if np.any(dist < 0):
        raise ValueError("distances must be nonnegative")
    if np.any(np.diff(dist, axis=1) < 0):
        raise ValueError("each distance row must be sorted ascending")

    n = dist.shape[0]
    positive = np.where(dist > 0, dist, np.inf)
    rho = positive.min(axis=1)
    rho[~np.isfinite(rho)] = 0.0

    target = np.log2(k)
    lo = np.full(n, SIGMA_LO)
    hi = np.full(n, SIGMA_HI)
    sigma = 0.5 * (lo + hi)
    active = np.ones(n, dtype=bool)
    for _ in range(SIGMA_ITERS):
        psum = _kernel_sums(dist[active], rho[active], sigma[active])
        err = psum - target
        done = np.abs(err) < SUM_TOLERANCE
        idx = np.flatnonzero(active)
        # the kernel sum grows with sigma
        too_big = (err > 0) & ~done
        hi[idx[too_big]] = sigma[idx[too_big]]
        lo[idx[~too_big & ~done]] = sigma[idx[~too_big & ~done]]
        active[idx[done]] = False
        if not active.any():
            break
        sigma[active] = 0.5 * (lo[active] + hi[active])
    return rho, sigma


def smooth_knn_calibrate(distances, k: int) -> tuple[float, float]:
    """Connectivity offset ``rho`` and bandwidth ``sigma`` for one point.

    ``rho`` is the smallest strictly positive neighbor distance and
    ``sigma`` solves ``sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)``
    by bisection. When ``log2(k)`` or more neighbors sit at distance
    ``<= rho`` the sum cannot reach the target and ``sigma`` collapses to the
    lower bracket.
    """
    rho, sigma = calibrate_rows(np.asarray(distances, dtype=np.float64)[None, :], k)
    return float(rho[0]), float(sigma[0])


def fuzzy_union(directed: sp.spmatrix) -> sp.csr_matrix:
    """Probabilistic union ``a + a.T - a * a.T``, clipped to [0, 1]."""
    a = sp.csr_matrix(directed)
    at = a.T.tocsr()
    g = (a + at - a.multiply(at)).tocsr()
    np.clip(g.data, 0.0, 1.0, out=g.data)
    g.eliminate_zeros()
    g.sort_indices()
    return g


def build_fuzzy_graph(batch, k_graph: int, seed: int = 0) -> FuzzyGraph:
    x = np.asarray(getattr(batch, "values", batch), dtype=np.float64)
    b = x.shape[0]
    if not 2 <= k_graph < b:
        raise ValueError(f"k_graph={k_graph} must satisfy 2 <= k_graph < B={b}")
    knn = knn_graph(x, k_graph, seed=seed)
    rho, sigma = calibrate_rows(knn.distances, k_graph)
    weights = np.exp(-np.maximum(knn.distances - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(b), k_graph)
    directed = sp.csr_matrix((weights.ravel(), (rows, knn.indices.ravel())), shape=(b, b))
    return FuzzyGraph(fuzzy_union(directed), rho, sigma, k_graph, knn)


def similarity_vectors(graph: FuzzyGraph) -> sp.csr_matrix:
    """Row ``i`` is point ``i``'s membership vector (sparse, dense-equivalent)."""
    return graph.memberships


def write_edge_list(graph: FuzzyGraph, path: str | Path) -> None:
    coo = sp.triu(graph.memberships, k=1).tocoo()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "g_ij"])
        for i, j, v in zip(coo.row, coo.col, coo.data):
            writer.writerow([int(i), int(j), f"{v:.12g}"])
