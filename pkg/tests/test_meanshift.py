import numpy as np
import pytest
from hypothesis import given, strategies as st

from msde.dataset import Dataset
from msde.detector import MSDE
from msde.meanshift import (ShiftConfig, ShiftState, mean_feature_shift, run_meanshift, score,
                            shift_step, weighted_mean, write_feature_shift, write_trajectories)
from msde.neighbors import NeighborGraph


def small_cfg(**kw):
    base = dict(k=8, nbd_sample_count_threshold=8, standardize=False, seed=0)
    base.update(kw)
    return MSDE(**base)


def test_config_defaults():
    cfg = ShiftConfig()
    assert (cfg.k, cfg.learning_rate, cfg.max_iters_shift, cfg.shift_threshold) == (100, 0.1, 6, 0.003)
    assert cfg.eps_stab == 1e-8
    with pytest.raises(ValueError):
        ShiftConfig(shift_threshold=0)
    with pytest.raises(ValueError):
        ShiftConfig(learning_rate=-0.1)


def test_weighted_mean_examples():
    pts = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    np.testing.assert_allclose(weighted_mean(pts, np.ones(3)), pts.mean(axis=0), atol=1e-12)
    assert np.array_equal(weighted_mean(pts, [1, 0, 0]), pts[0])
    assert weighted_mean(np.array([[0.0], [4.0]]), [1, 3])[0] == 3.0
    np.testing.assert_allclose(weighted_mean(pts, np.zeros(3)), pts.mean(axis=0))


def _graph(indices, positions):
    idx = np.asarray(indices)
    dist = np.linalg.norm(positions[idx] - positions[:, None], axis=-1)
    return NeighborGraph(idx, dist, True)


def test_fixed_point():
    x = np.array([[0.0], [-1.0], [1.0]])
    g = _graph([[1, 2], [0, 2], [0, 1]], x)
    out = shift_step(ShiftState.initial(x), g, np.ones(3), ShiftConfig(k=2))
    assert out.per_iter_delta[0, 0] == 0.0
    assert out.positions[0, 0] == 0.0


def test_one_dimensional_step():
    x = np.array([[0.0], [1.0]])
    g = _graph([[1], [0]], x)
    out = shift_step(ShiftState.initial(x), g, np.ones(2), ShiftConfig(k=1, learning_rate=0.1))
    assert out.per_iter_delta[0, 0] == 1.0
    assert out.positions[0, 0] == pytest.approx(0.1 / (1 + 1e-8), abs=1e-15)
    assert out.cumulative[0] == 1.0
    assert out.iterations_run == 1


def test_non_finite_position_names_point():
    x = np.array([[0.0], [1e308], [-1e308]])
    with np.errstate(over="ignore"):
        g = _graph([[1, 2], [0, 2], [0, 1]], x)
    with pytest.raises(FloatingPointError, match="point"):
        shift_step(ShiftState.initial(x), g, np.ones(3), ShiftConfig(k=2, learning_rate=1e10))


def test_mirror_symmetry(rng):
    half = rng.normal(size=(40, 2)) + [4.0, 0.0]
    x = np.vstack([half, -half])
    state = run_meanshift(x, np.ones(80), ShiftConfig(k=6, max_iters_shift=5))
    np.testing.assert_allclose(state.positions[:40], -state.positions[40:], atol=1e-9)
    np.testing.assert_allclose(state.positions[:40].mean(0), -state.positions[40:].mean(0), atol=1e-9)
    np.testing.assert_array_equal(state.cumulative[:40], state.cumulative[40:])


def test_huge_threshold_stops_after_one(rng):
    x = rng.normal(size=(50, 3))
    state = run_meanshift(x, np.ones(50), ShiftConfig(k=5, shift_threshold=1e12))
    assert state.iterations_run == 1
    assert state.converged_early


def test_zero_learning_rate_freezes(rng):
    x = rng.normal(size=(50, 3))
    state = run_meanshift(x, rng.uniform(1, 5, 50), ShiftConfig(k=5, learning_rate=0.0))
    assert np.array_equal(state.positions, x)
    assert state.iterations_run == 6
    np.testing.assert_allclose(state.cumulative, 6 * state.per_iter_delta[0], rtol=1e-12)
    assert np.all(state.per_iter_delta == state.per_iter_delta[0])


def test_k_must_be_below_n():
    with pytest.raises(ValueError):
        run_meanshift(np.zeros((5, 2)), np.ones(5), ShiftConfig(k=5))


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.9))
def test_step_bound_and_accumulation(seed, eta):
    r = np.random.default_rng(seed)
    x = r.normal(size=(40, 3))
    state = run_meanshift(x, r.uniform(0.5, 3, 40), ShiftConfig(k=6, learning_rate=eta),
                          record_trajectory=True)
    for t in range(state.iterations_run):
        move = np.linalg.norm(state.trajectory[t + 1] - state.trajectory[t], axis=1)
        assert np.all(move <= eta * state.per_iter_delta[t] * (1 + 1e-12))
    assert np.all(state.per_iter_delta >= 0)
    np.testing.assert_allclose(state.cumulative, state.per_iter_delta.sum(0), atol=1e-9)


def test_separation_blobs_and_outliers():
    r = np.random.default_rng(0)
    x = np.vstack([r.normal(size=(285, 2)) - 3, r.normal(size=(285, 2)) + 3,
                   r.uniform(-10, 10, size=(30, 2))])
    res = MSDE(seed=0).run(Dataset(x))
    d = res.state.cumulative
    assert d[570:].mean() > 2 * d[:570].mean()


def test_score_examples():
    s = score(np.array([2.0, 2.0, 2.0]))
    np.testing.assert_array_equal(s.scores, 0.5)
    np.testing.assert_array_equal(s.ranking, [0, 1, 2])
    s = score(np.array([0.0, 1.0]))
    np.testing.assert_allclose(s.scores, [0.2689, 0.7311], atol=1e-4)
    np.testing.assert_array_equal(s.ranking, [1, 0])
    with pytest.raises(ValueError):
        score(np.array([1.0]))


@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=40))
def test_score_monotone(values):
    d = np.array(values)
    s = score(d)
    assert np.all((s.scores > 0) & (s.scores < 1))
    assert sorted(s.ranking) == list(range(len(d)))
    i, j = np.triu_indices(len(d), 1)
    # sigmoid of an affine map cannot reverse an order
    assert not np.any((d[i] > d[j]) & (s.scores[i] < s.scores[j]))
    assert np.all(np.diff(d[s.ranking]) <= 0)


def test_scores_stay_inside_unit_interval():
    d = np.zeros(2000)
    d[0] = 1e6
    s = score(d).scores
    assert 0 < s.min() and s.max() < 1


@given(st.integers(0, 2**32 - 1))
def test_translation_equivariance(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(60, 3))
    shift = r.uniform(-10, 10, size=3)
    a = small_cfg().run(x)
    b = small_cfg().run(x + shift)
    np.testing.assert_allclose(b.state.positions, a.state.positions + shift, atol=1e-9)
    np.testing.assert_allclose(b.state.cumulative, a.state.cumulative, atol=1e-9)
    np.testing.assert_allclose(b.scores.scores, a.scores.scores, atol=1e-9)


def test_permutation_equivariance(rng):
    x = rng.normal(size=(80, 3))
    perm = rng.permutation(80)
    a = small_cfg().run(x)
    b = small_cfg().run(x[perm])
    assert np.array_equal(b.state.positions, a.state.positions[perm])
    assert np.array_equal(b.scores.scores, a.scores.scores[perm])


def test_exports(tmp_path, rng):
    x = rng.normal(size=(40, 3))
    state = run_meanshift(x, np.ones(40), ShiftConfig(k=5), record_trajectory=True)
    path = tmp_path / "traj.csv"
    write_trajectories(state, path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (state.iterations_run * 40, 6)
    np.testing.assert_allclose(rows[-40:, 3:], state.positions, rtol=1e-11)

    fpath = tmp_path / "fs.csv"
    write_feature_shift(state, fpath, ["a", "b", "c"])
    lines = fpath.read_text().splitlines()
    assert lines[0] == "feature,mean_abs_shift" and len(lines) == 4
    assert lines[1].startswith("a,")
    assert mean_feature_shift(state).shape == (3,)

    with pytest.raises(ValueError):
        write_trajectories(run_meanshift(x, np.ones(40), ShiftConfig(k=5)), path)


def test_detector_fit(rng):
    x = rng.normal(size=(120, 2))
    det = MSDE(k=10, nbd_sample_count_threshold=10).fit(x)
    assert det.decision_scores_.shape == (120,)
    assert det.weights_.shape == (120,)
    with pytest.raises(ValueError):
        MSDE(k=120).fit(x)
