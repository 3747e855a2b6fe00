"""Weighted mean shift with per-iteration neighbor graphs, and displacement scoring."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from .dataset import make_rng
from .neighbors import NeighborGraph, knn_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShiftConfig:
    k: int = 100
    learning_rate: float = 0.1
    max_iters_shift: int = 6
    shift_threshold: float = 0.003
    eps_stab: float = 1e-8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.max_iters_shift < 1:
            raise ValueError("max_iters_shift must be a positive integer")
        if self.shift_threshold <= 0:
            raise ValueError("shift_threshold must be positive")
        if self.eps_stab <= 0:
            raise ValueError("eps_stab must be positive")


@dataclass
class ShiftState:
    """Point positions plus the displacement history of a mean-shift run.

    ``per_iter_delta[t, i]`` is the distance from point ``i`` to its weighted
    neighbor mean at iteration ``t`` (measured before the update), and
    ``cumulative`` is its sum over executed iterations. ``feature_shift``
    accumulates the absolute per-coordinate movement of each point.
    """

    positions: np.ndarray
    per_iter_delta: np.ndarray
    cumulative: np.ndarray
    feature_shift: np.ndarray
    iterations_run: int = 0
    converged_early: bool = False
    trajectory: Optional[list[np.ndarray]] = None

    @classmethod
    def initial(cls, values: np.ndarray, record_trajectory: bool = False) -> "ShiftState":
        x = np.array(values, dtype=np.float64, copy=True)
        n, d = x.shape
        return cls(
            positions=x,
            per_iter_delta=np.zeros((0, n)),
            cumulative=np.zeros(n),
            feature_shift=np.zeros((n, d)),
            trajectory=[x.copy()] if record_trajectory else None,
        )

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class AnomalyScores:
    scores: np.ndarray
    displacement: np.ndarray
    ranking: np.ndarray


def _weight_vector(weights) -> np.ndarray:
    return np.asarray(getattr(weights, "w", weights), dtype=np.float64)


def weighted_mean(neighbor_positions, neighbor_weights) -> np.ndarray:
    """Mean of ``neighbor_positions`` under weights normalised to sum to one.

    All-zero weights fall back to the plain mean.
    """
    pts = np.asarray(neighbor_positions, dtype=np.float64)
    w = np.asarray(neighbor_weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return pts.mean(axis=0)
    return (w / total) @ pts


def neighborhood_means(positions: np.ndarray, graph: NeighborGraph, w: np.ndarray) -> np.ndarray:
    """Row-wise :func:`weighted_mean` over every point's neighbor list."""
    nbr_w = w[graph.indices]
    totals = nbr_w.sum(axis=1)
    empty = totals <= 0
    if np.any(empty):
        nbr_w[empty] = 1.0
        totals[empty] = graph.k
    nbr_w /= totals[:, None]
    return np.einsum("nk,nkd->nd", nbr_w, positions[graph.indices])


def shift_step(state: ShiftState, graph: NeighborGraph, weights, cfg: ShiftConfig) -> ShiftState:
    """One synchronous update of all points toward their weighted neighbor means."""
    x = state.positions
    w = _weight_vector(weights)
    if graph.n_points != x.shape[0] or w.shape[0] != x.shape[0]:
        raise ValueError("graph, weights and positions disagree on the number of points")

    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        mu = neighborhood_means(x, graph, w)
        toward = mu - x
        delta = np.sqrt(np.einsum("nd,nd->n", toward, toward))
        step = (cfg.learning_rate * delta / (delta + cfg.eps_stab))[:, None] * toward
        new_x = x + step

    bad = ~np.isfinite(new_x).all(axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise FloatingPointError(
            f"mean shift produced a non-finite position for point {i} "
            f"(delta={delta[i]!r}, weights of neighbors={w[graph.indices[i]]!r})"
        )

    trajectory = None
    if state.trajectory is not None:
        trajectory = state.trajectory + [new_x.copy()]
    return replace(
        state,
        positions=new_x,
        per_iter_delta=np.vstack([state.per_iter_delta, delta[None, :]]),
        cumulative=state.cumulative + delta,
        feature_shift=state.feature_shift + np.abs(step),
        iterations_run=state.iterations_run + 1,
        trajectory=trajectory,
    )


def run_meanshift(data, weights, cfg: ShiftConfig = ShiftConfig(), seed: int = 0,
                  record_trajectory: bool = False) -> ShiftState:
    """Iterate :func:`shift_step`, rebuilding the kNN graph on current positions.

    Stops after ``max_iters_shift`` iterations or as soon as the mean
    displacement of an iteration drops below ``shift_threshold``. The
    previous iteration's graph warm-starts the next NN-Descent build.
    """
    values = np.asarray(getattr(data, "values", data), dtype=np.float64)
    n = values.shape[0]
    if cfg.k >= n:
        raise ValueError(f"k={cfg.k} must be smaller than the number of points N={n}")

    state = ShiftState.initial(values, record_trajectory)
    graph = None
    for t in range(cfg.max_iters_shift):
        graph_seed = int(make_rng(seed, "shift-graph", t).integers(2**63))
        graph = knn_graph(state.positions, cfg.k, seed=graph_seed, init=graph)
        state = shift_step(state, graph, weights, cfg)
        mean_delta = float(state.per_iter_delta[-1].mean())
        logger.debug("shift iteration %d: mean delta %.6g", t, mean_delta)
        if mean_delta < cfg.shift_threshold:
            state.converged_early = True
            break
    return state


def score(state: ShiftState | np.ndarray) -> AnomalyScores:
    """Logistic of the z-scored cumulative displacement.

    Zero spread gives every point 0.5. The ranking orders points by
    descending displacement with ties broken by ascending index; this is the
    score order whenever the logistic does not saturate.
    """
    d = np.asarray(getattr(state, "cumulative", state), dtype=np.float64)
    if d.shape[0] < 2:
        raise ValueError("scoring needs at least 2 points")
    # fsum is correctly rounded, so the statistics do not depend on row order
    n = d.shape[0]
    mean = math.fsum(d) / n
    std = math.sqrt(math.fsum((d - mean) ** 2) / n)
    if std == 0 or not math.isfinite(std) or np.all(d == d[0]):
        s = np.full(d.shape, 0.5)
    else:
        s = expit((d - mean) / std)
        # keep scores strictly inside (0, 1) for extreme z
        s = np.clip(s, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    ranking = np.lexsort((np.arange(d.shape[0]), -d))
    return AnomalyScores(s, d.copy(), ranking)


def write_trajectories(state: ShiftState, path: str | Path) -> None:
    """One row per (iteration, point): residual delta and the post-step position."""
    if state.trajectory is None:
        raise ValueError("run_meanshift was called without record_trajectory=True")
    d = state.positions.shape[1]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "row_index", "delta"] + [f"x{j}" for j in range(d)])
        for t in range(state.iterations_run):
            pos = state.trajectory[t + 1]
            for i in range(state.n_points):
                writer.writerow([t, i, f"{state.per_iter_delta[t, i]:.12g}"]
                                + [f"{v:.12g}" for v in pos[i]])


def mean_feature_shift(state: ShiftState) -> np.ndarray:
    return state.feature_shift.mean(axis=0)


def write_feature_shift(state: ShiftState, path: str | Path, feature_names=None) -> None:
    shift = mean_feature_shift(state)
    names = feature_names or [f"x{j}" for j in range(shift.shape[0])]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "mean_abs_shift"])
        for name, v in zip(names, shift):
            writer.writerow([name, f"{v:.12g}"])
