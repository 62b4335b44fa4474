import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracdiff_lstm.exceptions import ContractError, InsufficientDataError
from fracdiff_lstm.fracdiff import apply_diff, frac_weights
from fracdiff_lstm.indicators import FEATURE_NAMES, bbands, build_features, ema, macd, rsi, sma
from fracdiff_lstm.timeseries import PriceSeries, SplitSpec, log_transform

prices_strategy = st.lists(st.floats(1.0, 1000.0), min_size=40, max_size=120).map(np.array)

WARM_UP = 26 + 9 - 2  # MACD signal line is the longest warm-up


def ema_oracle(p, k):
    """Plain loop EMA seeded by the first-k mean."""
    alpha = 2 / (k + 1)
    out = [sum(p[:k]) / k]
    for v in p[k:]:
        out.append(alpha * v + (1 - alpha) * out[-1])
    return np.array(out)


# -- single indicators -------------------------------------------------------


def test_sma_examples():
    assert sma([1, 2, 3, 4], 2).tolist() == [1.5, 2.5, 3.5]
    assert np.allclose(sma(np.full(30, 7.25), 5), 7.25, atol=1e-12)
    assert sma([1.0, 5.0, 9.0], 3).tolist() == [5.0]
    with pytest.raises(ContractError):
        sma([1.0, 2.0], 0)


def test_bbands_examples():
    upper, lower = bbands([1.0, 3.0], 2, 2.0)
    assert upper[0] == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-12)
    assert lower[0] == pytest.approx(2 - 2 * math.sqrt(2), abs=1e-12)
    flat_u, flat_l = bbands(np.full(20, 3.0), 10, 2.0)
    assert np.allclose(flat_u, 3.0) and np.allclose(flat_l, 3.0)
    p = np.arange(1.0, 21.0)
    u0, l0 = bbands(p, 10, 0.0)
    assert np.allclose(u0, sma(p, 10)) and np.allclose(l0, sma(p, 10))
    with pytest.raises(ContractError):
        bbands(p, 1)


def test_rsi_examples():
    assert rsi(np.arange(1.0, 20.0), 5).tolist() == [100.0] * 14
    assert rsi(np.arange(20.0, 1.0, -1), 5).tolist() == [0.0] * 14
    p = np.cumsum([10.0, 1, 1, -1, -1, 1])
    assert rsi(p, 5)[0] == pytest.approx(60.0, abs=1e-12)
    assert rsi(np.full(10, 4.0), 3).tolist() == [50.0] * 7


def test_ema_matches_loop_oracle(rng):
    p = rng.uniform(50, 150, 80)
    assert np.allclose(ema(p, 12), ema_oracle(p, 12), rtol=1e-13)


def test_macd_examples():
    line, signal = macd(np.full(60, 9.0))
    assert np.allclose(line, 0, atol=1e-12) and np.allclose(signal, 0, atol=1e-12)
    ramp_line, _ = macd(np.arange(100.0))
    assert np.all(ramp_line > 0)
    step = np.concatenate([np.full(40, 10.0), np.full(120, 11.0)])
    step_line, _ = macd(step)
    peak = int(np.argmax(step_line))
    assert step_line[peak] > 0
    assert np.all(np.diff(step_line[peak:]) <= 1e-12)
    with pytest.raises(ContractError):
        macd(np.arange(100.0), fast=26, slow=12)


def test_macd_matches_ema_difference(rng):
    p = rng.uniform(50, 150, 120)
    line, signal = macd(p)
    oracle = ema_oracle(p, 12)[14:] - ema_oracle(p, 26)
    assert np.allclose(line, oracle, rtol=1e-12)
    assert np.allclose(signal, ema_oracle(oracle, 9), rtol=1e-12)


@given(prices_strategy)
def test_rsi_bounds_and_band_order(p):
    r = rsi(p, 14)
    assert np.all((r >= 0) & (r <= 100))
    upper, lower = bbands(p, 10, 2.0)
    assert np.all(upper >= lower)


@given(prices_strategy, st.integers(1, 15))
def test_shift_equivariance(p, cut):
    suffix = p[cut:]
    assert np.allclose(sma(suffix, 5), sma(p, 5)[cut:])
    assert np.allclose(rsi(suffix, 9), rsi(p, 9)[cut:])
    up_s, lo_s = bbands(suffix, 10)
    up, lo = bbands(p, 10)
    assert np.allclose(up_s, up[cut:]) and np.allclose(lo_s, lo[cut:])


# -- feature matrix ----------------------------------------------------------


@pytest.fixture
def diff_and_prices(price_series):
    diff = apply_diff(log_transform(price_series), frac_weights(0.4, 1e-3))
    return diff, price_series


def test_feature_row_count(diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default())
    assert len(fm) == len(diff) - WARM_UP - 1
    assert fm.features.shape == (len(fm), len(FEATURE_NAMES))
    assert np.all(np.isfinite(fm.features))


def test_target_is_next_value(diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default())
    pos = np.searchsorted(diff.dates, fm.dates)
    assert np.array_equal(fm.target, diff.values[pos + 1])
    assert np.array_equal(fm.target_dates, diff.dates[pos + 1])
    assert np.array_equal(fm.features[:, 0], diff.values[pos])


def test_scaler_statistics(diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default())
    X = fm.X[fm.train_mask]
    assert np.allclose(X.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(X.var(axis=0), 1, atol=1e-9)
    y = fm.y[fm.train_mask]
    assert abs(y.mean()) < 1e-9 and abs(y.var() - 1) < 1e-9
    assert np.allclose(fm.unscale_target(fm.y), fm.target, atol=1e-12)


def test_masks_partition(diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default())
    assert not np.any(fm.train_mask & fm.test_mask)
    assert np.all(fm.train_mask | fm.test_mask)
    assert not np.any(fm.fit_mask & fm.val_mask)


def test_no_look_ahead(diff_and_prices):
    diff, prices = diff_and_prices
    split = SplitSpec.study_default()
    full = build_features(diff, prices, split)
    cut = 1800
    short_prices = PriceSeries(prices.asset_id, prices.dates[:cut], prices.close[:cut])
    short_diff = apply_diff(log_transform(short_prices), frac_weights(0.4, 1e-3))
    short = build_features(short_diff, short_prices, split)
    n = len(short)
    assert np.array_equal(short.dates, full.dates[:n])
    assert np.allclose(short.features, full.features[:n], rtol=1e-12, atol=1e-12)
    assert np.array_equal(short.target, full.target[:n])


def test_start_drops_early_rows(diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default(), start="2015-01-01")
    assert str(fm.dates[0]) >= "2015-01-01"


def test_no_training_rows(diff_and_prices):
    diff, prices = diff_and_prices
    late = SplitSpec("2000-01-01", "2000-12-31", "2000-06-01", "2000-12-31", "2021-01-01", "2023-12-31")
    with pytest.raises(InsufficientDataError):
        build_features(diff, prices, late)


def test_feature_csv_and_sidecar(tmp_path, diff_and_prices):
    diff, prices = diff_and_prices
    fm = build_features(diff, prices, SplitSpec.study_default())
    path, sidecar = fm.save(tmp_path / "features.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["Date", "target", *FEATURE_NAMES]
    assert sidecar.exists()
