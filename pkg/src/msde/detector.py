from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, standardize
from .meanshift import AnomalyScores, ShiftConfig, ShiftState, run_meanshift, score
from .weights import DensityWeights, WeightConfig, compute_weights

logger = logging.getLogger(__name__)


@dataclass
class MSDEResult:
    scores: AnomalyScores
    state: ShiftState
    weights: DensityWeights


class MSDE:
    """Mean Shift Density Enhancement anomaly detector.

    Points are pulled toward density-weighted neighbor means for a few
    iterations; the total distance each point had to its neighbor mean is
    its raw anomaly signal.

    Parameters
    ----------
    k : int
        Neighbors per mean-shift update (also the fuzzy-graph neighbor count,
        capped at ``B - 1`` per batch).
    nbd_sample_count_threshold : int
        Neighbor count a row must exceed inside the radius during weight
        estimation.
    learning_rate : float
    max_iters_shift : int
    shift_threshold : float
        Early stop when the mean displacement falls below this value.
    max_iters_weight_count : int
        Number of radii averaged for each weight.
    satisfiability_proportion : float
        Fraction of rows that must meet the count condition.
    batch_size : int
    standardize : bool
        Z-score features before fitting.
    seed : int
    """

    def __init__(self, k=100, nbd_sample_count_threshold=70, learning_rate=0.1,
                 max_iters_shift=6, shift_threshold=0.003, max_iters_weight_count=4,
                 satisfiability_proportion=0.3, batch_size=4096, standardize=True, seed=0):
        self.k = k
        self.nbd_sample_count_threshold = nbd_sample_count_threshold
        self.learning_rate = learning_rate
        self.max_iters_shift = max_iters_shift
        self.shift_threshold = shift_threshold
        self.max_iters_weight_count = max_iters_weight_count
        self.satisfiability_proportion = satisfiability_proportion
        self.batch_size = batch_size
        self.standardize = standardize
        self.seed = seed

    @property
    def weight_config(self) -> WeightConfig:
        return WeightConfig(
            nbd_sample_count_threshold=self.nbd_sample_count_threshold,
            satisfiability_proportion=self.satisfiability_proportion,
            max_iters_weight_count=self.max_iters_weight_count,
            batch_size=self.batch_size,
            k_graph=max(2, self.k),
        )

    @property
    def shift_config(self) -> ShiftConfig:
        return ShiftConfig(
            k=self.k,
            learning_rate=self.learning_rate,
            max_iters_shift=self.max_iters_shift,
            shift_threshold=self.shift_threshold,
        )

    def run(self, data, record_trajectory: bool = False) -> MSDEResult:
        if not isinstance(data, Dataset):
            data = Dataset(np.asarray(data, dtype=np.float64))
        if self.k >= data.n_samples:
            raise ValueError(f"k={self.k} must be smaller than the number of points N={data.n_samples}")
        if self.standardize:
            data = standardize(data)
        weights = compute_weights(data, self.weight_config, seed=self.seed)
        state = run_meanshift(data, weights, self.shift_config, seed=self.seed,
                              record_trajectory=record_trajectory)
        logger.info("MSDE: N=%d d=%d, %d shift iterations (early stop: %s)",
                    data.n_samples, data.n_features, state.iterations_run, state.converged_early)
        return MSDEResult(score(state), state, weights)

    def fit(self, X):
        result = self.run(X)
        self.result_ = result
        self.decision_scores_ = result.scores.scores
        self.displacement_ = result.scores.displacement
        self.weights_ = result.weights.w
        return self

    def fit_predict_score(self, X) -> np.ndarray:
        return self.fit(X).decision_scores_
