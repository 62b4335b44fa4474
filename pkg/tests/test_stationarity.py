import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracdiff_lstm.exceptions import ContractError, DegenerateInputError, NotFoundError
from fracdiff_lstm.stationarity import CRITICAL_VALUE, adf_stat, d_grid, pearson_corr, search_min_d


def ols_adf_oracle(x, lags=1):
    """Textbook OLS t-statistic via the normal equations (independent of the QR path)."""
    dx = np.diff(x)
    y = dx[lags:]
    cols = [np.ones(y.size), x[lags:-1]] + [dx[lags - i : -i] for i in range(1, lags + 1)]
    X = np.column_stack(cols)
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    s2 = resid @ resid / (y.size - X.shape[1])
    return beta[1] / np.sqrt(s2 * xtx_inv[1, 1])


def test_matches_normal_equation_oracle(rng):
    x = np.cumsum(rng.standard_normal(500))
    for lags in (0, 1, 3):
        assert adf_stat(x, lags).statistic == pytest.approx(ols_adf_oracle(x, lags), rel=1e-9)


def test_statsmodels_agreement(rng):
    adfuller = pytest.importorskip("statsmodels.tsa.stattools").adfuller
    x = np.cumsum(rng.standard_normal(800))
    ref = adfuller(x, maxlag=1, regression="c", autolag=None)[0]
    assert adf_stat(x, 1).statistic == pytest.approx(ref, rel=1e-8)


def test_white_noise_rejects(rng):
    res = adf_stat(rng.standard_normal(2000))
    assert res.stationary and res.statistic < CRITICAL_VALUE
    assert res.lags == 1 and res.n_obs == 1998


def test_constant_is_degenerate():
    with pytest.raises(DegenerateInputError):
        adf_stat(np.full(100, 3.0))


def test_bad_lags():
    with pytest.raises(ContractError):
        adf_stat(np.arange(100.0), lags=-1)


@given(st.floats(0.01, 100), st.floats(-1e3, 1e3), st.integers(0, 2**31))
def test_location_scale_invariance(a, b, seed):
    x = np.cumsum(np.random.default_rng(seed).standard_normal(300))
    assert adf_stat(a * x + b).statistic == pytest.approx(adf_stat(x).statistic, rel=1e-8, abs=1e-8)


def test_correlation_examples(rng):
    x = rng.standard_normal(50)
    assert pearson_corr(x, x) == pytest.approx(1.0)
    assert pearson_corr(x, -x) == pytest.approx(-1.0)
    assert pearson_corr([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819805060619657, abs=1e-12)
    assert pearson_corr([1, 2, 3], [1, 2, 4]) == pytest.approx(np.corrcoef([1, 2, 3], [1, 2, 4])[0, 1], abs=1e-14)
    with pytest.raises(DegenerateInputError):
        pearson_corr([1, 1, 1], [1, 2, 3])


def test_grid():
    g = d_grid(0, 1, 0.01)
    assert g.size == 101 and g[0] == 0 and g[-1] == 1.0 and g[46] == 0.46


def test_white_noise_needs_no_differencing(rng):
    res = search_min_d(rng.standard_normal(1200))
    assert res.d_star == 0.0


def test_random_walk_capped_grid_not_found(rng):
    x = np.cumsum(rng.standard_normal(1750))
    with pytest.raises(NotFoundError) as info:
        search_min_d(x, grid_end=0.05)
    assert info.value.table is not None and info.value.table.size == 6


def test_sweep_properties(random_walk):
    res = search_min_d(random_walk)
    g = res.grid
    ok = np.isfinite(g["pearson_corr"])
    corr = g["pearson_corr"][ok]
    assert np.all(np.diff(corr) <= 1e-6)
    i_star = int(np.flatnonzero(g["d"] == res.d_star)[0])
    assert g["adf_stat"][i_star] < CRITICAL_VALUE
    assert np.all(g["adf_stat"][:i_star][np.isfinite(g["adf_stat"][:i_star])] >= CRITICAL_VALUE)
    assert g["pearson_corr"][-1] < g["pearson_corr"][i_star]
    lines = res.to_csv().splitlines()
    assert lines[0] == "d,adf_stat,pearson_corr" and len(lines) == 102
