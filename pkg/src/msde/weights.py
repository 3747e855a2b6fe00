"""Per-sample density weights from fuzzy similarity rows.

Each batch is mapped to its fuzzy membership rows, a radius is chosen so
that enough rows have more than ``nbd_sample_count_threshold`` rows
strictly inside it, and the weight of a sample is its neighbor count
averaged over ``max_iters_weight_count`` uniformly shrinking radii.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, make_rng
from .fuzzygraph import build_fuzzy_graph, similarity_vectors
from .neighbors import EXACT_MAX_PAIRS_POINTS, RangeCounter, max_pairwise_distance

logger = logging.getLogger(__name__)

RADIUS_FLOOR = 1e-6
BISECTION_ITERS = 40


@dataclass(frozen=True)
class WeightConfig:
    nbd_sample_count_threshold: int = 70
    satisfiability_proportion: float = 0.3
    max_iters_weight_count: int = 4
    batch_size: int = 4096
    k_graph: int = 100

    def __post_init__(self):
        if self.nbd_sample_count_threshold < 1:
            raise ValueError("nbd_sample_count_threshold must be a positive integer")
        if not 0.0 < self.satisfiability_proportion <= 1.0:
            raise ValueError("satisfiability_proportion must lie in (0, 1]")
        if self.max_iters_weight_count < 1:
            raise ValueError("max_iters_weight_count must be a positive integer")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.k_graph < 2:
            raise ValueError("k_graph must be at least 2")


@dataclass(frozen=True)
class RadiusResult:
    epsilon: float
    relaxed: bool
    fallback: bool


@dataclass(frozen=True)
class DensityWeights:
    w: np.ndarray
    batch_id: np.ndarray
    epsilon_used: list[float] = field(default_factory=list)
    relaxed: list[bool] = field(default_factory=list)
    fallback: list[bool] = field(default_factory=list)
    degenerate: list[bool] = field(default_factory=list)

    @property
    def n_batches(self) -> int:
        return len(self.epsilon_used)


def _as_counter(sim_points) -> RangeCounter:
    return sim_points if isinstance(sim_points, RangeCounter) else RangeCounter(sim_points)


def _bisect(kth: np.ndarray, needed: int, eps_max: float) -> float:
    # a point is satisfied at eps iff its (threshold + 1)-th smallest
    # distance, self included, is < eps
    def feasible(eps):
        return np.count_nonzero(kth < eps) >= needed

    lo, hi = 0.0, eps_max
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def find_radius(sim_points, cfg: WeightConfig, seed: int = 0) -> RadiusResult:
    """Smallest radius at which enough rows have more than the threshold count.

    Bisects on ``[0, eps_max]`` where ``eps_max`` is the largest pairwise
    distance between rows. The satisfied count is nondecreasing in the
    radius. If even ``eps_max`` fails, both the threshold and the proportion
    are halved once; if that also fails ``eps_max`` is returned as a
    fallback.
    """
    counter = _as_counter(sim_points)
    b = counter.n_points
    if b < 2:
        raise ValueError("find_radius needs at least 2 points")
    if b <= EXACT_MAX_PAIRS_POINTS:
        eps_max = counter.max_distance()
    else:
        eps_max = max_pairwise_distance(counter.points, seed=seed)
    hi = eps_max if eps_max > 0 else RADIUS_FLOOR * 1e-6

    attempts = [
        (cfg.nbd_sample_count_threshold, cfg.satisfiability_proportion),
        (math.ceil(cfg.nbd_sample_count_threshold / 2), cfg.satisfiability_proportion / 2),
    ]
    for attempt, (threshold, alpha) in enumerate(attempts):
        needed = max(1, math.ceil(alpha * b))
        if threshold + 1 > b:
            continue
        kth = counter.kth_distance(threshold + 1)
        if np.count_nonzero(kth < hi) >= needed:
            return RadiusResult(_bisect(kth, needed, hi), relaxed=attempt > 0, fallback=False)
    logger.info("radius search unsatisfiable after relaxation; using max distance %.6g", eps_max)
    return RadiusResult(hi, relaxed=True, fallback=True)


def radius_schedule(epsilon: float, m: int) -> np.ndarray:
    step = (epsilon - RADIUS_FLOOR) / m
    return epsilon - np.arange(m) * step


def multi_radius_weights(sim_points, epsilon: float, cfg: WeightConfig) -> np.ndarray:
    """Mean strict-inequality neighbor count over the shrinking radius schedule.

    A radius at or below ``1e-6`` leaves no room for the schedule; the
    weights are then uniform (all ones).
    """
    counter = _as_counter(sim_points)
    if epsilon <= RADIUS_FLOOR:
        logger.warning("radius %.3g <= %.0e: using uniform weights", epsilon, RADIUS_FLOOR)
        return np.ones(counter.n_points)
    radii = radius_schedule(epsilon, cfg.max_iters_weight_count)
    counts = counter.count_all(radii)
    return counts.mean(axis=1)


def batch_slices(n: int, batch_size: int) -> list[slice]:
    """Contiguous slices; a trailing batch shorter than half a batch is merged."""
    if n <= batch_size:
        return [slice(0, n)]
    starts = list(range(0, n, batch_size))
    if n - starts[-1] < batch_size / 2:
        starts.pop()
    bounds = starts + [n]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def compute_weights(data: Dataset | np.ndarray, cfg: WeightConfig = WeightConfig(),
                    seed: int = 0) -> DensityWeights:
    x = np.asarray(getattr(data, "values", data), dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("compute_weights needs at least 2 rows")

    if n <= cfg.batch_size:
        order = np.arange(n)
    else:
        order = make_rng(seed, "weights-shuffle").permutation(n)

    w = np.empty(n)
    batch_id = np.empty(n, dtype=np.int64)
    eps_used, relaxed, fallback, degenerate = [], [], [], []
    for bi, sl in enumerate(batch_slices(n, cfg.batch_size)):
        rows = order[sl]
        batch = x[rows]
        b = batch.shape[0]
        batch_id[rows] = bi
        k_graph = min(cfg.k_graph, b - 1)
        if k_graph < 2:
            logger.warning("batch %d has only %d rows; using uniform weights", bi, b)
            w[rows] = 1.0
            eps_used.append(0.0)
            relaxed.append(False)
            fallback.append(True)
            degenerate.append(True)
            continue
        batch_seed = int(make_rng(seed, "weights-batch", bi).integers(2**63))
        graph = build_fuzzy_graph(batch, k_graph, seed=batch_seed)
        counter = RangeCounter(similarity_vectors(graph))
        radius = find_radius(counter, cfg, seed=batch_seed)
        w[rows] = multi_radius_weights(counter, radius.epsilon, cfg)
        eps_used.append(radius.epsilon)
        relaxed.append(radius.relaxed)
        fallback.append(radius.fallback)
        degenerate.append(radius.epsilon <= RADIUS_FLOOR)
        logger.debug("batch %d: B=%d eps=%.6g relaxed=%s fallback=%s",
                     bi, b, radius.epsilon, radius.relaxed, radius.fallback)
    return DensityWeights(w, batch_id, eps_used, relaxed, fallback, degenerate)


def write_weights(weights: DensityWeights, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_index", "w", "batch_id"])
        for i, (wi, bi) in enumerate(zip(weights.w, weights.batch_id)):
            writer.writerow([i, f"{wi:.12g}", int(bi)])
