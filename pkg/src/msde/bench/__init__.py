from .baseline import knn_baseline
from .metrics import auc_pr, auc_roc, precision_at_n
from .runner import BenchGrid, EvalResult, run_benchmark, run_cell
from .synthetic import (MODES, NOISE_LEVELS, NoiseSpec, SyntheticSpec, generate_normals,
                        inject_anomalies, inject_noise, make_dataset)

__all__ = [
    "knn_baseline",
    "auc_pr",
    "auc_roc",
    "precision_at_n",
    "BenchGrid",
    "EvalResult",
    "run_benchmark",
    "run_cell",
    "MODES",
    "NOISE_LEVELS",
    "NoiseSpec",
    "SyntheticSpec",
    "generate_normals",
    "inject_anomalies",
    "inject_noise",
    "make_dataset",
]
