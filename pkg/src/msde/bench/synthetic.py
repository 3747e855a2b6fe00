"""Synthetic normal data and the four anomaly types (global, local, cluster, dependency)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.mixture import GaussianMixture

from ..dataset import Dataset, make_rng

MODES = ("global", "local", "cluster", "dependency")
NOISE_LEVELS = (0.0, 0.01, 0.05, 0.10, 0.25, 0.50)


@dataclass(frozen=True)
class SyntheticSpec:
    n_normal: int = 950
    n_anomaly: int = 50
    dims: int = 10
    mode: str = "global"
    n_components: int = 3
    mode_scale: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.n_anomaly > self.n_normal:
            raise ValueError("n_anomaly must not exceed n_normal")
        if self.mode_scale <= 0:
            raise ValueError("mode_scale must be positive")
        if self.n_components < 1 or self.dims < 1:
            raise ValueError("n_components and dims must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not any(math.isclose(self.ratio, r) for r in NOISE_LEVELS):
            raise ValueError(f"noise ratio {self.ratio} not in {NOISE_LEVELS}")


def random_spd(dims: int, rng: np.random.Generator, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Random rotation of a diagonal with eigenvalues drawn from ``[lo, hi]``."""
    q, r = np.linalg.qr(rng.standard_normal((dims, dims)))
    q *= np.sign(np.diag(r))
    eig = rng.uniform(lo, hi, size=dims)
    cov = (q * eig) @ q.T
    return 0.5 * (cov + cov.T)


def generate_normals(spec: SyntheticSpec) -> Dataset:
    rng = make_rng(spec.seed, "normals")
    means = rng.uniform(-5.0, 5.0, size=(spec.n_components, spec.dims))
    covs = [random_spd(spec.dims, rng) for _ in range(spec.n_components)]
    component = rng.integers(0, spec.n_components, size=spec.n_normal)
    x = np.empty((spec.n_normal, spec.dims))
    for c in range(spec.n_components):
        rows = np.flatnonzero(component == c)
        x[rows] = rng.multivariate_normal(means[c], covs[c], size=rows.size)
    return Dataset(x, [f"x{j}" for j in range(spec.dims)], np.zeros(spec.n_normal, dtype=int))


def fit_mixture(x: np.ndarray, n_components: int, seed: int) -> GaussianMixture:
    gm = GaussianMixture(n_components=n_components, covariance_type="full",
                         random_state=seed % (2**32))
    return gm.fit(x)


def _sample_mixture(weights, means, covs, n, rng) -> np.ndarray:
    comp = rng.choice(len(weights), size=n, p=weights / weights.sum())
    out = np.empty((n, means.shape[1]))
    for c in range(len(weights)):
        rows = np.flatnonzero(comp == c)
        if rows.size:
            out[rows] = rng.multivariate_normal(means[c], covs[c], size=rows.size)
    return out


def permute_columns(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle each column independently: marginals kept, joint structure destroyed."""
    out = np.array(rows, copy=True)
    for j in range(out.shape[1]):
        out[:, j] = out[rng.permutation(out.shape[0]), j]
    return out


def make_anomalies(normals: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n_anomaly
    if spec.mode == "global":
        lo, hi = normals.min(axis=0), normals.max(axis=0)
        span = hi - lo
        return rng.uniform(lo - 0.1 * span, hi + 0.1 * span, size=(n, normals.shape[1]))

    gm = fit_mixture(normals, spec.n_components, int(rng.integers(2**31)))
    if spec.mode == "local":
        return _sample_mixture(gm.weights_, gm.means_, gm.covariances_ * spec.mode_scale, n, rng)
    if spec.mode == "cluster":
        c = int(rng.integers(gm.n_components))
        return rng.multivariate_normal(gm.means_[c] * spec.mode_scale, gm.covariances_[c], size=n)
    # dependency
    if n < 2:
        raise ValueError("dependency anomalies need n_anomaly >= 2")
    draws = _sample_mixture(gm.weights_, gm.means_, gm.covariances_, n, rng)
    return permute_columns(draws, rng)


def inject_anomalies(normals: Dataset, spec: SyntheticSpec) -> Dataset:
    """Append ``spec.n_anomaly`` anomalies of ``spec.mode`` and shuffle all rows."""
    if spec.mode == "dependency" and spec.n_anomaly < 2:
        raise ValueError("dependency anomalies need n_anomaly >= 2")
    rng = make_rng(spec.seed, "anomalies", spec.mode)
    anomalies = make_anomalies(normals.values, spec, rng)
    x = np.vstack([normals.values, anomalies])
    y = np.r_[np.zeros(normals.n_samples, dtype=int), np.ones(anomalies.shape[0], dtype=int)]
    order = rng.permutation(x.shape[0])
    return Dataset(x[order], normals.feature_names, y[order])


def noise_feature_count(ratio: float, d: int) -> int:
    # half-up rounding: 0.05 * 10 -> 1
    return int(math.floor(ratio * d + 0.5))


def inject_noise(data: Dataset, spec: NoiseSpec) -> Dataset:
    """Append irrelevant standard-normal features, ``round(ratio * d)`` of them."""
    extra = noise_feature_count(spec.ratio, data.n_features)
    if extra == 0:
        return data
    rng = make_rng(spec.seed, "noise", spec.ratio)
    noise = rng.standard_normal((data.n_samples, extra))
    names = data.feature_names + [f"noise_{j}" for j in range(extra)]
    return Dataset(np.hstack([data.values, noise]), names, data.labels)


def make_dataset(spec: SyntheticSpec, noise: float = 0.0) -> Dataset:
    data = inject_anomalies(generate_normals(spec), spec)
    return inject_noise(data, NoiseSpec(noise, spec.seed))
