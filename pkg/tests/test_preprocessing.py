import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from demograph.errors import DataError
from demograph.preprocessing import (
    ScalingParams,
    assemble_model_matrix,
    load_scaling,
    log_transform,
    minmax_rescale,
    save_scaling,
    summarize_column,
)


def sorted_quantile(values, p):
    # reference: full sort, then linear interpolation between order statistics
    xs = sorted(float(v) for v in values)
    h = (len(xs) - 1) * p
    lo = int(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (h - lo)


def test_log_transform_values():
    assert log_transform(0) == 0.0
    assert log_transform(999) == 3.0
    assert round(log_transform(3838), 2) == 3.58
    with pytest.raises(DataError):
        log_transform(-1)


@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(0, 1e9)))
def test_log_transform_preserves_rank(x):
    y = log_transform(x)
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(y[order]) >= 0)


def test_minmax_examples():
    np.testing.assert_array_equal(minmax_rescale([2, 4, 6]), [0, 0.5, 1])
    np.testing.assert_array_equal(minmax_rescale([5, 5, 5]), [0, 0, 0])
    np.testing.assert_allclose(minmax_rescale([0, 3, 1]), [0, 1, 1 / 3], rtol=0, atol=1e-15)
    with pytest.raises(DataError):
        minmax_rescale([])


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e6, 1e6)))
def test_rescaled_range(c):
    r = minmax_rescale(c)
    assert r.min() == 0.0
    assert np.all((r >= 0) & (r <= 1))
    if c.max() > c.min():
        assert r.max() == 1.0
    assert summarize_column(r).min == 0.0


def test_summary_examples():
    s = summarize_column([1, 2, 3, 4, 5])
    assert (s.median, s.q1, s.q3) == (3, 2, 4)
    assert s.iqr_ratio == pytest.approx(2 / 3, abs=0)
    s = summarize_column([7])
    assert s.min == s.q1 == s.median == s.q3 == s.max == 7
    assert summarize_column([0, 0, 0, 1]).iqr_ratio is None


def test_summary_matches_sort_oracle(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        col = rng.lognormal(3, 2, n).round(int(rng.integers(0, 3)))
        s = summarize_column(col)
        assert s.q1 == sorted_quantile(col, 0.25)
        assert s.median == sorted_quantile(col, 0.5)
        assert s.q3 == sorted_quantile(col, 0.75)
        assert s.min == min(col) and s.max == max(col)
        assert s.min <= s.q1 <= s.median <= s.q3 <= s.max


def test_model_matrix_examples():
    m = assemble_model_matrix(np.zeros((1, 45)))
    assert m.values.shape == (1, 90) and not m.values.any()
    m = assemble_model_matrix(np.array([[0.0], [99.0]]), ["x"])
    np.testing.assert_array_equal(m.values, [[0, 0], [1, 1]])
    assert m.columns == ["x", "log_x"]
    assert [c["transform"] for c in m.manifest()] == ["plain", "log10p1"]


def test_model_matrix_determinism(rng):
    f = rng.poisson(5, (100, 45)).astype(float)
    assert assemble_model_matrix(f).values.tobytes() == assemble_model_matrix(f).values.tobytes()


def test_non_finite_reports_coordinates():
    f = np.zeros((3, 4))
    f[2, 1] = np.nan
    with pytest.raises(DataError, match="row 2, column 1"):
        assemble_model_matrix(f)


def test_scaling_fit_on_training_rows(rng, tmp_path):
    f = rng.poisson(5, (50, 3)).astype(float)
    train = np.arange(30)
    m = assemble_model_matrix(f, ["a", "b", "c"], fit_rows=train)
    ref = ScalingParams.fit(np.hstack([f, np.log10(f + 1)])[train])
    np.testing.assert_array_equal(m.scaling.minimum, ref.minimum)
    assert m.values[train].min() == 0 and m.values[train].max() == 1
    path = tmp_path / "scaling.json"
    save_scaling(path, m)
    cols, scaling = load_scaling(path)
    assert cols == m.columns
    again = assemble_model_matrix(f, ["a", "b", "c"], scaling=scaling)
    assert again.values.tobytes() == m.values.tobytes()
    assert json.loads(path.read_text())["columns"][3]["name"] == "log_a"
