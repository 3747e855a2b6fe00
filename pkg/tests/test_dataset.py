import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from msde.dataset import Dataset, DataError, load_csv, make_rng, standardize, write_csv


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_basic(tmp_path):
    data = load_csv(_write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
    assert data.values.shape == (3, 2)
    assert data.feature_names == ["a", "b"]
    assert data.labels is None
    np.testing.assert_array_equal(data.values[:, 1], [2, 4, 6])


def test_load_label_column(tmp_path):
    data = load_csv(_write(tmp_path, "a,y,b\n1,0,2\n3,1,4\n"), label_column="y")
    assert data.feature_names == ["a", "b"]
    np.testing.assert_array_equal(data.labels, [0, 1])


@pytest.mark.parametrize("text,fragment", [
    ("a,b\n1,NaN\n", "row 1"),
    ("a,b\n1,2\n3,inf\n", "row 2"),
    ("a,b\n1,x\n", "'b'"),
    ("a,b\n1,2\n3\n", "row 2"),
])
def test_load_bad_cells(tmp_path, text, fragment):
    with pytest.raises(DataError, match=fragment):
        load_csv(_write(tmp_path, text))


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "absent.csv")


def test_bad_labels(tmp_path):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "a,y\n1,2\n"), label_column="y")
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "a,y\n1,0\n"), label_column="z")


def test_dataset_is_read_only():
    data = Dataset(np.ones((2, 2)))
    with pytest.raises(ValueError):
        data.values[0, 0] = 3.0


def test_standardize_examples():
    out = standardize(Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])))
    np.testing.assert_allclose(out.values[:, 0], [-1.2247, 0, 1.2247], atol=1e-4)
    np.testing.assert_array_equal(out.values[:, 1], 0.0)


def test_standardize_needs_two_rows():
    with pytest.raises(DataError):
        standardize(Dataset(np.ones((1, 3))))


@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
              elements=st.floats(-1e4, 1e4)))
def test_standardize_properties(x):
    once = standardize(Dataset(x)).values
    assert np.all(np.abs(once.mean(axis=0)) < 1e-9)
    std = once.std(axis=0)
    assert np.all((np.abs(std - 1) < 1e-9) | (std == 0))
    np.testing.assert_allclose(standardize(Dataset(once)).values, once, atol=1e-9)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_subnormal=False)),
       st.booleans())
def test_csv_round_trip(tmp_path_factory, x, with_labels):
    labels = (np.arange(len(x)) % 2) if with_labels else None
    data = Dataset(x, labels=labels)
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(data, path)
    back = load_csv(path, label_column="label" if with_labels else None)
    np.testing.assert_allclose(back.values, x, rtol=1e-11, atol=1e-300)
    assert back.feature_names == data.feature_names
    if with_labels:
        np.testing.assert_array_equal(back.labels, labels)


def test_make_rng_streams():
    a = make_rng(3, "x", 1).random(5)
    np.testing.assert_array_equal(a, make_rng(3, "x", 1).random(5))
    assert not np.array_equal(a, make_rng(3, "x", 2).random(5))
    assert not np.array_equal(a, make_rng(4, "x", 1).random(5))
    assert not np.array_equal(make_rng(0, 0.05).random(3), make_rng(0, 0.1).random(3))
