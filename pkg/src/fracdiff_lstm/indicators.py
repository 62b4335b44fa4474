"""Technical indicators on raw prices and the LSTM feature matrix."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.preprocessing import StandardScaler

from ._validation import check_1d, check_window
from .exceptions import ContractError, InsufficientDataError
from .fracdiff import DiffSeries
from .timeseries import PriceSeries, SplitSpec, as_dates

FEATURE_NAMES = (
    "lag",
    "SMA_5",
    "SMA_10",
    "SMA_20",
    "RSI_9",
    "RSI_14",
    "RSI_21",
    "UpperBBand_10_2",
    "LowerBBand_10_2",
    "MACD_12_26",
    "Signal_9",
)


def sma(p, k: int) -> np.ndarray:
    """Rolling unweighted mean; output ``i`` covers ``p[i : i + k]``."""
    k = check_window(k, "k")
    p = check_1d(p, "p", min_length=k)
    return sliding_window_view(p, k).mean(axis=1)


def bbands(p, k: int = 10, d_mult: float = 2.0):
    """Bollinger bands ``SMA_k +/- d_mult * std_k`` (sample std, divisor ``k - 1``)."""
    k = check_window(k, "k", minimum=2)
    p = check_1d(p, "p", min_length=k)
    windows = sliding_window_view(p, k)
    mid = windows.mean(axis=1)
    width = windows.std(axis=1, ddof=1) * d_mult
    return mid + width, mid - width


def rsi(p, k: int = 14) -> np.ndarray:
    """Relative strength index from plain k-day average gains and losses.

    Output ``i`` uses the ``k`` changes ending at ``p[i + k]``. A window with
    gains only is 100, losses only is 0, and no movement at all is 50.
    """
    k = check_window(k, "k")
    p = check_1d(p, "p", min_length=k + 1)
    change = np.diff(p)
    gain = sliding_window_view(np.clip(change, 0, None), k).mean(axis=1)
    loss = sliding_window_view(np.clip(-change, 0, None), k).mean(axis=1)
    out = np.full(gain.shape, 50.0)
    up = loss == 0
    out[up & (gain > 0)] = 100.0
    mixed = ~up
    out[mixed] = 100.0 - 100.0 / (1.0 + gain[mixed] / loss[mixed])
    return out


def ema(p, k: int) -> np.ndarray:
    """EMA with ``alpha = 2 / (k + 1)`` seeded by the SMA of the first ``k`` values.

    Output ``i`` corresponds to ``p[i + k - 1]``.
    """
    k = check_window(k, "k")
    p = check_1d(p, "p", min_length=k)
    alpha = 2.0 / (k + 1.0)
    out = np.empty(p.size - k + 1)
    out[0] = p[:k].mean()
    for i, value in enumerate(p[k:], start=1):
        out[i] = alpha * value + (1.0 - alpha) * out[i - 1]
    return out


def macd(p, fast: int = 12, slow: int = 26, signal: int = 9):
    """MACD line ``EMA_fast - EMA_slow`` and its ``signal``-period EMA.

    The MACD line starts at ``p[slow - 1]``; the signal line starts
    ``signal - 1`` values later.
    """
    if fast >= slow:
        raise ContractError(f"fast period ({fast}) must be shorter than slow period ({slow})")
    p = check_1d(p, "p", min_length=slow + signal - 1)
    line = ema(p, fast)[slow - fast :] - ema(p, slow)
    return line, ema(line, signal)


def _right_align(values, n):
    out = np.full(n, np.nan)
    out[n - values.size :] = values
    return out


def indicator_frame(close) -> dict:
    """All indicator columns right-aligned to ``close`` (NaN during warm-up)."""
    close = check_1d(close, "close")
    n = close.size
    upper, lower = bbands(close, 10, 2.0)
    line, signal = macd(close, 12, 26, 9)
    return {
        "SMA_5": _right_align(sma(close, 5), n),
        "SMA_10": _right_align(sma(close, 10), n),
        "SMA_20": _right_align(sma(close, 20), n),
        "RSI_9": _right_align(rsi(close, 9), n),
        "RSI_14": _right_align(rsi(close, 14), n),
        "RSI_21": _right_align(rsi(close, 21), n),
        "UpperBBand_10_2": _right_align(upper, n),
        "LowerBBand_10_2": _right_align(lower, n),
        "MACD_12_26": _right_align(line, n),
        "Signal_9": _right_align(signal, n),
    }


def scaler_to_dict(s: StandardScaler) -> dict:
    return {"mean": s.mean_.tolist(), "scale": s.scale_.tolist()}


def scaler_from_dict(data: dict) -> StandardScaler:
    s = StandardScaler()
    s.mean_ = np.asarray(data["mean"], dtype=np.float64)
    s.scale_ = np.asarray(data["scale"], dtype=np.float64)
    s.var_ = s.scale_**2
    s.n_features_in_ = s.mean_.size
    s.n_samples_seen_ = 0
    return s


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows for one differenced series.

    Row ``i`` holds indicators and the differenced value at ``dates[i]``;
    ``target[i]`` is the differenced value at the next trading date
    ``target_dates[i]``. ``features`` and ``target`` are unscaled; the scalers
    were fitted on training rows only (rows whose target date falls inside
    the training window).
    """

    dates: np.ndarray
    target_dates: np.ndarray
    features: np.ndarray
    target: np.ndarray
    names: tuple
    split: SplitSpec
    x_scaler: StandardScaler
    y_scaler: StandardScaler

    def __len__(self):
        return self.target.size

    @property
    def X(self) -> np.ndarray:
        return self.x_scaler.transform(self.features)

    @property
    def y(self) -> np.ndarray:
        return (self.target - self.y_scaler.mean_[0]) / self.y_scaler.scale_[0]

    def unscale_target(self, values) -> np.ndarray:
        return np.asarray(values) * self.y_scaler.scale_[0] + self.y_scaler.mean_[0]

    def _between(self, start, end):
        return (self.target_dates >= start) & (self.target_dates <= end)

    @property
    def train_mask(self) -> np.ndarray:
        return self._between(self.split.train_start, self.split.train_end)

    @property
    def val_mask(self) -> np.ndarray:
        return self._between(self.split.val_start, self.split.val_end)

    @property
    def fit_mask(self) -> np.ndarray:
        """Training rows outside the validation window (used while tuning)."""
        return self.train_mask & ~self.val_mask

    @property
    def test_mask(self) -> np.ndarray:
        return self._between(self.split.test_start, self.split.test_end)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(("Date", "target") + tuple(self.names)) + "\n")
        for i in range(len(self)):
            cells = [str(self.dates[i]), repr(float(self.target[i]))]
            cells += [repr(float(v)) for v in self.features[i]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def scaler_record(self) -> dict:
        return {
            "names": list(self.names),
            "features": scaler_to_dict(self.x_scaler),
            "target": scaler_to_dict(self.y_scaler),
            "split": self.split.to_dict(),
        }

    def save(self, path) -> tuple[Path, Path]:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        sidecar = path.with_name(path.stem + "_scaler.json")
        sidecar.write_text(json.dumps(self.scaler_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path, sidecar


def build_features(diff: DiffSeries, prices: PriceSeries, split: SplitSpec, start=None) -> FeatureMatrix:
    """Assemble the lagged differenced value, indicators and next-day target.

    Indicators are computed on raw closes restricted to the differenced
    series' dates; rows inside any indicator warm-up, rows dated before
    ``start`` (used to give several transforms a common support) and the
    final row (no next-day target) are dropped. Scalers are fitted on
    training rows.
    """
    idx = np.searchsorted(prices.dates, diff.dates)
    if np.any(idx >= len(prices)) or np.any(prices.dates[np.minimum(idx, len(prices) - 1)] != diff.dates):
        raise ContractError("every differenced date must exist in the price series")
    close = prices.close[idx]
    columns = {"lag": np.asarray(diff.values, dtype=np.float64)}
    columns.update(indicator_frame(close))
    names = FEATURE_NAMES
    matrix = np.column_stack([columns[name] for name in names])

    target = np.append(diff.values[1:], np.nan)
    target_dates = np.append(diff.dates[1:], np.datetime64("NaT", "D"))
    keep = np.all(np.isfinite(matrix), axis=1) & np.isfinite(target)
    if start is not None:
        keep &= diff.dates >= np.datetime64(start, "D")
    dates, target_dates = diff.dates[keep], target_dates[keep]
    features, target = matrix[keep], target[keep]

    train = (target_dates >= split.train_start) & (target_dates <= split.train_end)
    if train.sum() < 2:
        raise InsufficientDataError("no training rows left after indicator warm-up")
    x_scaler = StandardScaler().fit(features[train])
    y_scaler = StandardScaler().fit(target[train].reshape(-1, 1))
    return FeatureMatrix(
        as_dates(dates), as_dates(target_dates), features, target, names, split, x_scaler, y_scaler
    )
