"""Augmented Dickey-Fuller test and the minimal stationarising ``d`` search."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np

from ._validation import check_1d, check_same_length
from .exceptions import ContractError, DegenerateInputError, InsufficientDataError, NotFoundError
from .fracdiff import apply_diff, frac_weights
from .timeseries import LogSeries

logger = logging.getLogger(__name__)

CRITICAL_VALUE = -2.86
SEARCH_TAU = 1e-4


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    critical_value: float
    lags: int
    n_obs: int

    @property
    def stationary(self) -> bool:
        return self.statistic < self.critical_value


def adf_stat(x, lags: int = 1, critical_value: float = CRITICAL_VALUE) -> AdfResult:
    """Constant-only ADF regression.

    Fits ``dx_t = a + g x_{t-1} + sum_i b_i dx_{t-i} + e_t`` by OLS and
    returns the t-statistic of ``g``.
    """
    if int(lags) != lags or lags < 0:
        raise ContractError(f"lags must be a non-negative integer, got {lags}")
    lags = int(lags)
    x = check_1d(x, "x", min_length=lags + 20)
    dx = np.diff(x)
    y = dx[lags:]
    n = y.size
    cols = [np.ones(n), x[lags:-1]]
    cols += [dx[lags - i : -i] for i in range(1, lags + 1)]
    X = np.column_stack(cols)

    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300) or not np.all(np.isfinite(r)):
        raise DegenerateInputError("ADF regressors are singular (constant or collinear input)")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    dof = n - X.shape[1]
    sigma2 = resid @ resid / dof
    scale = np.mean(y * y) + np.mean(x * x)
    if sigma2 <= 1e-24 * max(scale, 1e-300):
        raise DegenerateInputError("ADF regression has zero residual variance")
    r_inv = np.linalg.inv(r)
    se_gamma = np.sqrt(sigma2 * np.sum(r_inv[1] ** 2))
    return AdfResult(float(beta[1] / se_gamma), critical_value, lags, n)


def pearson_corr(a, b) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    a = check_1d(a, "a", min_length=2)
    b = check_1d(b, "b", min_length=2)
    check_same_length(a, b)
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = da @ da, db @ db
    if saa <= 0 or sbb <= 0:
        raise DegenerateInputError("correlation is undefined for a zero-variance input")
    return float(np.clip((da @ db) / np.sqrt(saa * sbb), -1.0, 1.0))


@dataclass(frozen=True)
class DSearchResult:
    """Outcome of :func:`search_min_d`.

    ``grid`` has one row per candidate ``d`` with columns ``d``, ``adf_stat``,
    ``pearson_corr`` and ``window``; rows whose window left too little data are
    NaN in the statistic columns.
    """

    d_star: float
    grid: np.ndarray
    tau: float
    critical_value: float = CRITICAL_VALUE
    lags: int = 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("d,adf_stat,pearson_corr\n")
        for row in self.grid:
            buf.write(f"{float(row['d'])!r},{float(row['adf_stat'])!r},{float(row['pearson_corr'])!r}\n")
        return buf.getvalue()


GRID_DTYPE = np.dtype([("d", "f8"), ("adf_stat", "f8"), ("pearson_corr", "f8"), ("window", "i8")])


def d_grid(start: float, end: float, step: float) -> np.ndarray:
    n = int(np.floor((end - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 10)


def sweep(x, grid, tau: float = SEARCH_TAU, lags: int = 1, critical_value: float = CRITICAL_VALUE) -> np.ndarray:
    """ADF statistic and correlation with ``x`` for every ``d`` in ``grid``."""
    values = x.values if isinstance(x, LogSeries) else check_1d(x, "x")
    table = np.zeros(len(grid), dtype=GRID_DTYPE)
    for i, d in enumerate(grid):
        w = frac_weights(float(d), tau)
        table[i]["d"] = d
        table[i]["window"] = w.window
        if values.size - w.window + 1 < lags + 20:
            table[i]["adf_stat"] = np.nan
            table[i]["pearson_corr"] = np.nan
            continue
        y = apply_diff(values, w)
        table[i]["adf_stat"] = adf_stat(y, lags, critical_value).statistic
        table[i]["pearson_corr"] = pearson_corr(values[w.window - 1 :], y)
    return table


def search_min_d(
    x,
    grid_start: float = 0.0,
    grid_end: float = 1.0,
    step: float = 0.01,
    tau: float = SEARCH_TAU,
    lags: int = 1,
    critical_value: float = CRITICAL_VALUE,
) -> DSearchResult:
    """Smallest grid ``d`` whose fixed-width differenced series passes the ADF test.

    ``x`` should be the training-window log prices. Correlation is measured
    between ``x`` and its differenced version over the dates that have output.
    The whole grid is evaluated so it can be plotted; raises
    :class:`NotFoundError` (carrying the table) if no ``d`` is stationary.
    """
    grid = d_grid(grid_start, grid_end, step)
    table = sweep(x, grid, tau, lags, critical_value)
    feasible = np.isfinite(table["adf_stat"])
    if not feasible.any():
        raise InsufficientDataError("series too short for every grid point at this tau")
    hits = np.flatnonzero(feasible & (table["adf_stat"] < critical_value))
    if hits.size == 0:
        raise NotFoundError(f"no d in [{grid_start}, {grid_end}] gives an ADF statistic below {critical_value}", table)
    d_star = float(table["d"][hits[0]])
    logger.info("minimal stationary d = %.2f (tau=%g)", d_star, tau)
    return DSearchResult(d_star, table, tau, critical_value, lags)
