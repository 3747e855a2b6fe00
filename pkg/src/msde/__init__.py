"""Mean Shift Density Enhancement: anomaly scores from cumulative mean-shift displacement."""
from .dataset import Dataset, DataError, load_csv, standardize, write_csv
from .detector import MSDE, MSDEResult
from .fuzzygraph import FuzzyGraph, build_fuzzy_graph, similarity_vectors, smooth_knn_calibrate
from .meanshift import (AnomalyScores, ShiftConfig, ShiftState, run_meanshift, score,
                        shift_step, weighted_mean)
from .neighbors import (NeighborGraph, RangeCounter, knn_exact, knn_graph, knn_nndescent,
                        max_pairwise_distance, range_count)
from .weights import (DensityWeights, WeightConfig, compute_weights, find_radius,
                      multi_radius_weights)

__all__ = [
    "Dataset",
    "DataError",
    "load_csv",
    "standardize",
    "write_csv",
    "MSDE",
    "MSDEResult",
    "FuzzyGraph",
    "build_fuzzy_graph",
    "similarity_vectors",
    "smooth_knn_calibrate",
    "AnomalyScores",
    "ShiftConfig",
    "ShiftState",
    "run_meanshift",
    "score",
    "shift_step",
    "weighted_mean",
    "NeighborGraph",
    "RangeCounter",
    "knn_exact",
    "knn_graph",
    "knn_nndescent",
    "max_pairwise_distance",
    "range_count",
    "DensityWeights",
    "WeightConfig",
    "compute_weights",
    "find_radius",
    "multi_radius_weights",
]

__version__ = "0.1.0"
