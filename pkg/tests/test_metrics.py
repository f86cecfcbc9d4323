import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surgebias.metrics import (
    improvement_scatter,
    mae,
    metrics_report,
    mse,
    r2,
    rmse,
    station_report,
)


# naive reference implementations, deliberately loop-based and numpy-free
def naive_mse(y, y_hat):
    return sum((a - b) ** 2 for a, b in zip(y, y_hat)) / len(y)


def naive_rmse(y, y_hat):
    return math.sqrt(naive_mse(y, y_hat))


def naive_mae(y, y_hat):
    return sum(abs(a - b) for a, b in zip(y, y_hat)) / len(y)


def naive_r2(y, y_hat):
    ybar = sum(y) / len(y)
    ss_res = sum((a - b) ** 2 for a, b in zip(y, y_hat))
    ss_tot = sum((a - ybar) ** 2 for a in y)
    return 1.0 - ss_res / ss_tot


def test_perfect_fit():
    y = np.array([1.0, 2.0, 3.0])
    assert mse(y, y) == 0.0
    assert rmse(y, y) == 0.0
    assert mae(y, y) == 0.0
    assert r2(y, y) == 1.0


def test_unit_errors():
    y = np.array([0.0, 0.0])
    y_hat = np.array([1.0, 1.0])
    assert mse(y, y_hat) == 1.0
    assert rmse(y, y_hat) == 1.0
    assert mae(y, y_hat) == 1.0


def test_r2_of_mean_predictor_is_zero():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    y_mean = np.full(4, y.mean())
    assert r2(y, y_mean) == pytest.approx(0.0, abs=1e-15)
    worse = y_mean + 5.0
    assert r2(y, worse) < 0.0


def test_r2_constant_y_is_an_error():
    with pytest.raises(ValueError, match="constant"):
        r2(np.array([2.0, 2.0]), np.array([1.0, 3.0]))


def test_r2_needs_two_samples():
    with pytest.raises(ValueError, match="two samples"):
        r2(np.array([1.0]), np.array([1.0]))


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        mse(np.zeros(3), np.zeros(4))


def test_against_naive_oracle_on_random_pairs():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        y = rng.standard_normal(n) * rng.uniform(0.5, 3.0)
        y_hat = y + rng.standard_normal(n) * rng.uniform(0.0, 2.0)
        assert abs(mse(y, y_hat) - naive_mse(y, y_hat)) < 1e-12
        assert abs(rmse(y, y_hat) - naive_rmse(y, y_hat)) < 1e-12
        assert abs(mae(y, y_hat) - naive_mae(y, y_hat)) < 1e-12
        assert abs(r2(y, y_hat) - naive_r2(y, y_hat)) < 1e-12
        assert mae(y, y_hat) <= rmse(y, y_hat) + 1e-15


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=1, max_size=40),
    st.integers(0, 2**32 - 1),
)
def test_rmse_squared_equals_mse(values, seed):
    y = np.asarray(values)
    y_hat = y + np.random.default_rng(seed).standard_normal(y.size)
    assert rmse(y, y_hat) ** 2 == pytest.approx(mse(y, y_hat), abs=1e-12)
    assert mae(y, y_hat) <= rmse(y, y_hat) + 1e-12


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(0.1, 50.0),
    st.floats(-100.0, 100.0),
)
def test_r2_invariant_under_common_affine_rescale(seed, slope, shift):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(20)
    y_hat = y + 0.3 * rng.standard_normal(20)
    base = r2(y, y_hat)
    rescaled = r2(slope * y + shift, slope * y_hat + shift)
    assert rescaled == pytest.approx(base, abs=1e-9)


def test_metrics_report_consistency():
    rng = np.random.default_rng(5)
    y = rng.standard_normal(50)
    y_hat = y + 0.1 * rng.standard_normal(50)
    rep = metrics_report(y, y_hat, label="x")
    assert rep.n == 50
    assert rep.rmse**2 == pytest.approx(rep.mse, abs=1e-12)


def test_station_report_perfect_correction():
    obs = np.array([1.0, 2.0, 3.0, 2.0])
    mod = obs + 0.5
    rep = station_report("st", obs, mod, corrected=obs)
    assert rep.with_ml.r2 == 1.0
    assert rep.improved


def test_station_report_null_correction():
    obs = np.array([1.0, 2.0, 3.0, 2.0])
    mod = obs + 0.5
    rep = station_report("st", obs, mod, corrected=mod)
    assert rep.with_ml.r2 == rep.without_ml.r2
    assert rep.with_ml.mse == rep.without_ml.mse
    assert not rep.improved


def test_station_report_alignment():
    with pytest.raises(ValueError, match="aligned"):
        station_report("st", np.zeros(3), np.zeros(3), np.zeros(4))


def test_improvement_scatter_fractions():
    obs = np.array([1.0, 2.0, 3.0, 4.0])
    mod = obs + 1.0
    perfect = [station_report(f"s{i}", obs, mod, obs) for i in range(3)]
    pairs, fraction = improvement_scatter(perfect)
    assert fraction == 1.0
    assert len(pairs) == 3

    null = [station_report(f"s{i}", obs, mod, mod) for i in range(3)]
    _, fraction = improvement_scatter(null)
    assert fraction == 0.0  # points on x=y are not strict improvements
