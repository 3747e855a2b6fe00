"""Grid runner: modes x noise levels x seeds, MSDE against the kNN baseline."""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from ..dataset import make_rng, standardize
from ..detector import MSDE
from . import metrics
from .baseline import knn_baseline
from .synthetic import MODES, NOISE_LEVELS, SyntheticSpec, make_dataset

logger = logging.getLogger(__name__)

METRICS = ("auc_roc", "auc_pr", "precision_at_n")


@dataclass(frozen=True)
class EvalResult:
    method: str
    mode: str
    noise: float
    seed: int
    auc_roc: float
    auc_pr: float
    precision_at_n: float


@dataclass(frozen=True)
class BenchGrid:
    modes: tuple = MODES
    noise: tuple = NOISE_LEVELS
    seeds: tuple = (0, 1, 2)
    n_normal: int = 950
    n_anomaly: int = 50
    dims: int = 10
    n_components: int = 3

    def cells(self):
        return list(product(self.modes, self.noise, self.seeds))


@dataclass
class BenchOutcome:
    results: list[EvalResult] = field(default_factory=list)
    failures: list[tuple] = field(default_factory=list)


def evaluate(method: str, mode: str, noise: float, seed: int, scores, labels) -> EvalResult:
    return EvalResult(
        method, mode, float(noise), int(seed),
        metrics.auc_roc(scores, labels),
        metrics.auc_pr(scores, labels),
        metrics.precision_at_n(scores, labels),
    )


def run_cell(mode: str, noise: float, seed: int, grid: BenchGrid = BenchGrid(),
             msde_params: Optional[dict] = None, baseline_k: int = 5) -> list[EvalResult]:
    spec = SyntheticSpec(grid.n_normal, grid.n_anomaly, grid.dims, mode,
                         grid.n_components, seed=seed)
    data = standardize(make_dataset(spec, noise))
    params = dict(msde_params or {})
    params["seed"] = int(make_rng(seed, "bench-msde", mode, noise).integers(2**63))
    # data is already standardized
    params["standardize"] = False
    msde_scores = MSDE(**params).fit_predict_score(data)
    base_scores = knn_baseline(data, baseline_k)
    return [
        evaluate("MSDE", mode, noise, seed, msde_scores, data.labels),
        evaluate("KNN", mode, noise, seed, base_scores, data.labels),
    ]


def _run_cell_safe(args):
    mode, noise, seed, grid, msde_params, baseline_k = args
    t0 = time.perf_counter()
    try:
        res = run_cell(mode, noise, seed, grid, msde_params, baseline_k)
        return (mode, noise, seed), res, None, time.perf_counter() - t0
    except Exception as exc:  # a failed cell must not stop the grid
        return (mode, noise, seed), [], f"{type(exc).__name__}: {exc}", time.perf_counter() - t0


def run_benchmark(grid: BenchGrid = BenchGrid(), msde_params: Optional[dict] = None,
                  baseline_k: int = 5, workers: int = 1) -> BenchOutcome:
    """Run every grid cell; results come back in grid order regardless of ``workers``."""
    cells = grid.cells()
    if not cells:
        raise ValueError("empty benchmark grid")
    jobs = [(m, nz, s, grid, msde_params, baseline_k) for m, nz, s in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_cell_safe, jobs))
    else:
        done = map(_run_cell_safe, jobs)

    outcome = BenchOutcome()
    for i, (cell, res, err, secs) in enumerate(done):
        if err is None:
            msde_res = res[0]
            logger.info("cell %d/%d mode=%s noise=%.2f seed=%d: MSDE auc_roc=%.4f (%.1fs)",
                        i + 1, len(jobs), *cell, msde_res.auc_roc, secs)
            outcome.results.extend(res)
        else:
            logger.error("cell %d/%d mode=%s noise=%.2f seed=%d failed: %s",
                         i + 1, len(jobs), *cell, err)
            outcome.failures.append((*cell, err))
    return outcome


def write_results(results: Iterable[EvalResult], path: str | Path) -> None:
    names = [f.name for f in fields(EvalResult)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in results:
            row = asdict(r)
            writer.writerow([
                f"{row[n]:.6f}" if n in METRICS else (f"{row[n]:.2f}" if n == "noise" else row[n])
                for n in names
            ])


def read_results(path: str | Path) -> list[EvalResult]:
    with Path(path).open(newline="") as fh:
        return [
            EvalResult(r["method"], r["mode"], float(r["noise"]), int(r["seed"]),
                       float(r["auc_roc"]), float(r["auc_pr"]), float(r["precision_at_n"]))
            for r in csv.DictReader(fh)
        ]


def aggregate(results: Iterable[EvalResult], by: tuple = ("method", "noise")) -> list[dict]:
    """Mean of each metric per group, groups in first-seen order."""
    groups: dict[tuple, list[EvalResult]] = {}
    for r in results:
        groups.setdefault(tuple(getattr(r, b) for b in by), []).append(r)
    rows = []
    for key, members in groups.items():
        row = dict(zip(by, key))
        row["n"] = len(members)
        for m in METRICS:
            row[f"avg_{m}"] = float(np.mean([getattr(r, m) for r in members]))
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[_cell(c, r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells)
    return "\n".join(lines) + "\n"


def _cell(col: str, v) -> str:
    if col == "noise":
        return f"{v:.2f}"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_aggregates(results: list[EvalResult], out_dir: str | Path) -> dict[str, Path]:
    """Write per-cell (seed-averaged) and overall (mode- and seed-averaged) tables."""
    out_dir = Path(out_dir)
    paths = {}
    for name, by in (("aggregate_by_mode", ("method", "mode", "noise")),
                     ("aggregate", ("method", "noise"))):
        rows = aggregate(results, by)
        csv_path = out_dir / f"{name}.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(rows[0]) if rows else list(by))
            for row in rows:
                writer.writerow([_cell(c, v) for c, v in row.items()])
        (out_dir / f"{name}.txt").write_text(format_table(rows))
        paths[name] = csv_path
    return paths
