"""Trading signals from price forecasts, cost-aware backtests and portfolios.

Timing convention: a signal dated ``t`` is decided at the close of ``t`` and
earns the return from ``t`` to the next trading date. Costs are proportional
to turnover and charged on the first day the new position is exposed, so

    r_{t+1} = pos_t * (close_{t+1} / close_t - 1) - c * |pos_t - pos_{t-1}|

with ``pos`` equal to zero before the first signal.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_1d, check_same_length, frozen
from .exceptions import ContractError
from .timeseries import PriceSeries, as_dates

DEFAULT_COST = 0.00005
STRATEGIES = ("long_short", "long_only")


def _check_cost(c):
    if not np.isfinite(c) or c < 0 or c >= 1:
        raise ContractError(f"cost rate must lie in [0, 1), got {c}")
    return float(c)


@dataclass(frozen=True)
class SignalSeries:
    """Positions decided at the close of each date."""

    dates: np.ndarray
    positions: np.ndarray
    strategy: str = "long_short"
    cost_rate: float = DEFAULT_COST

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        dates = as_dates(self.dates)
        positions = np.asarray(self.positions, dtype=np.int8)
        if dates.shape != positions.shape or dates.ndim != 1:
            raise ContractError("dates and positions must be 1-D and of equal length")
        allowed = (0, 1) if self.strategy == "long_only" else (-1, 0, 1)
        if not np.all(np.isin(positions, allowed)):
            raise ContractError(f"{self.strategy} positions must lie in {allowed}")
        object.__setattr__(self, "cost_rate", _check_cost(self.cost_rate))
        object.__setattr__(self, "dates", frozen(dates))
        object.__setattr__(self, "positions", frozen(positions))

    def __len__(self):
        return self.positions.size

    @property
    def turnover(self) -> float:
        return float(np.abs(np.diff(self.positions, prepend=0)).sum())


@dataclass(frozen=True)
class EquityLine:
    """Strategy value after each trading day, starting from ``initial``.

    ``positions[t]`` is the exposure held over day ``t`` and ``turnover[t]``
    the position change paid for on that day.
    """

    dates: np.ndarray
    equity: np.ndarray
    positions: np.ndarray
    daily_returns: np.ndarray
    turnover: np.ndarray
    initial: float = 1.0

    def __post_init__(self):
        dates = as_dates(self.dates)
        arrays = [np.asarray(getattr(self, f), dtype=np.float64) for f in ("equity", "positions", "daily_returns", "turnover")]
        if any(a.shape != dates.shape for a in arrays) or dates.ndim != 1:
            raise ContractError("equity line columns must be 1-D and of equal length")
        object.__setattr__(self, "dates", frozen(dates))
        for name, arr in zip(("equity", "positions", "daily_returns", "turnover"), arrays):
            object.__setattr__(self, name, frozen(arr))

    def __len__(self):
        return self.equity.size

    @property
    def path(self) -> np.ndarray:
        """Equity including the starting value."""
        return np.concatenate(([self.initial], self.equity))

    @classmethod
    def from_returns(cls, dates, returns, positions, turnover, initial=1.0) -> "EquityLine":
        returns = np.asarray(returns, dtype=np.float64)
        return cls(dates, initial * np.cumprod(1.0 + returns), positions, returns, turnover, initial)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("Date,equity,position,daily_return,turnover\n")
        for row in zip(self.dates, self.equity, self.positions, self.daily_returns, self.turnover):
            buf.write(f"{row[0]},{float(row[1])!r},{float(row[2])!r},{float(row[3])!r},{float(row[4])!r}\n")
        return buf.getvalue()

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, text: str) -> "EquityLine":
        rows = [line.split(",") for line in text.splitlines()[1:] if line.strip()]
        if not rows:
            raise ContractError("equity CSV has no rows")
        cols = list(zip(*rows))
        num = [np.array(c, dtype=np.float64) for c in cols[1:]]
        return cls(as_dates(list(cols[0])), *num)


def gen_signals(actual, predicted, dates=None, strategy: str = "long_short", c: float = DEFAULT_COST) -> SignalSeries:
    """Positions from next-day price forecasts.

    ``predicted[i]`` is the forecast of the next close made at the end of the
    day whose close is ``actual[i]``. A forecast above ``actual * (1 + c)``
    goes long; below ``actual * (1 - c)`` goes short (or flat for
    ``long_only``); anything in between keeps the previous position, which
    starts at 0.
    """
    c = _check_cost(c)
    if strategy not in STRATEGIES:
        raise ContractError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    y = check_1d(actual, "actual")
    yhat = check_1d(predicted, "predicted")
    check_same_length(y, yhat, ("actual", "predicted"))
    if dates is None:
        dates = np.arange(y.size).astype("datetime64[D]")
    low = 0 if strategy == "long_only" else -1
    trigger = np.where(yhat > y * (1.0 + c), 1, np.where(yhat < y * (1.0 - c), low, 2))
    positions = np.empty(y.size, dtype=np.int8)
    current = 0
    for i, t in enumerate(trigger):
        if t != 2:
            current = t
        positions[i] = current
    return SignalSeries(dates, positions, strategy, c)


def _simulate(close, positions, c):
    held = positions.astype(np.float64)
    turnover = np.abs(np.diff(held, prepend=0.0))
    gross = close[1:] / close[:-1] - 1.0
    return held * gross - c * turnover, turnover


def run_backtest(prices: PriceSeries, signals: SignalSeries) -> EquityLine:
    """Equity line of ``signals`` traded at the closes of ``prices``.

    Signal dates must be consecutive trading dates of ``prices``. The line
    covers every date after the first signal up to the price following the
    last signal (or the last signal itself if no later price exists).
    """
    idx = np.searchsorted(prices.dates, signals.dates)
    if np.any(idx >= len(prices)) or np.any(prices.dates[np.minimum(idx, len(prices) - 1)] != signals.dates):
        raise ContractError("every signal date must be a price date")
    if len(signals) == 0 or np.any(np.diff(idx) != 1):
        raise ContractError("signals must cover consecutive price dates")
    start = idx[0]
    stop = min(idx[-1] + 1, len(prices) - 1)
    n = stop - start
    if n < 1:
        raise ContractError("no price after the first signal")
    close = prices.close[start : stop + 1]
    positions = signals.positions[:n]
    returns, turnover = _simulate(close, positions, signals.cost_rate)
    return EquityLine.from_returns(prices.dates[start + 1 : stop + 1], returns, positions, turnover)


def buy_and_hold(prices: PriceSeries, c: float = DEFAULT_COST) -> EquityLine:
    """Long from the first close to the last, paying one entry cost.

    Equity on day ``t`` is ``(1 - c) * close_t / close_0``.
    """
    c = _check_cost(c)
    close = prices.close
    equity = (1.0 - c) * close[1:] / close[0]
    returns = equity / np.concatenate(([1.0], equity[:-1])) - 1.0
    n = close.size - 1
    turnover = np.zeros(n)
    turnover[0] = 1.0
    return EquityLine(prices.dates[1:], equity, np.ones(n), returns, turnover)


def portfolio_equity(lines, weights=None) -> EquityLine:
    """Daily-rebalanced weighted portfolio over the dates common to every line."""
    lines = list(lines)
    if len(lines) < 2:
        raise ContractError("a portfolio needs at least two equity lines")
    w = np.full(len(lines), 1.0 / len(lines)) if weights is None else check_1d(weights, "weights")
    check_same_length(w, lines, ("weights", "lines"))
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ContractError("weights must be non-negative and sum to 1")
    common = lines[0].dates
    for line in lines[1:]:
        common = np.intersect1d(common, line.dates)
    if common.size == 0:
        raise ContractError("equity lines share no dates")
    returns = np.zeros(common.size)
    positions = np.zeros(common.size)
    turnover = np.zeros(common.size)
    for weight, line in zip(w, lines):
        sel = np.searchsorted(line.dates, common)
        returns += weight * line.daily_returns[sel]
        positions += weight * line.positions[sel]
        turnover += weight * line.turnover[sel]
    return EquityLine.from_returns(common, returns, positions, turnover)
