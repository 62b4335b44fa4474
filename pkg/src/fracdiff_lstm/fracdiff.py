"""Fractional and tempered-fractional differencing with a fixed-width window.

The weights of ``(1 - e^{-lam} B)^d`` are generated by the recursion

    w_0 = 1,    w_k = -w_{k-1} * (d - k + 1) / k * e^{-lam}

and truncated at the first weight whose modulus falls below ``tau``. With
``lam = 0`` this is ordinary fractional differencing, and with integer ``d``
the sequence terminates on its own (``d = 1`` gives log returns).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter, lfiltic

from ._validation import check_1d, frozen
from .exceptions import ContractError, InsufficientDataError
from .timeseries import LogSeries, as_dates

DEFAULT_TAU = 1e-5
MAX_WEIGHTS = 10_000
KINDS = ("integer", "fractional", "tempered")


class WeightCapWarning(RuntimeWarning):
    """Weight generation hit the hard cap before the threshold was reached."""


@dataclass(frozen=True)
class DiffSpec:
    """How a series is differenced: kind, order ``d``, tempering ``lam`` and threshold ``tau``."""

    kind: str
    d: float
    lam: float = 0.0
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 < self.tau < 1.0:
            raise ContractError(f"tau must lie in (0, 1), got {self.tau}")
        if self.d < 0:
            raise ContractError(f"negative differencing order is not supported (d={self.d})")
        if self.kind == "integer" and float(self.d) != int(self.d):
            raise ContractError(f"integer differencing needs a whole d, got {self.d}")
        if self.lam < 0 or (self.kind != "tempered" and self.lam != 0):
            raise ContractError(f"lam must be >= 0 and only set for tempered kind, got {self.lam}")
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "tau", float(self.tau))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "lambda": self.lam, "tau": self.tau}

    @classmethod
    def from_dict(cls, data: dict) -> "DiffSpec":
        return cls(data["kind"], data["d"], data.get("lambda", 0.0), data["tau"])


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    spec: DiffSpec

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0 or w[0] != 1.0:
            raise ContractError("weights must be a non-empty 1-D sequence starting with 1")
        object.__setattr__(self, "weights", frozen(w))

    @property
    def window(self) -> int:
        return self.weights.size

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class DiffSeries:
    """Differenced values on the dates that have a full window of history."""

    dates: np.ndarray
    values: np.ndarray
    spec: DiffSpec
    window: int
    asset_id: str = "asset"

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape:
            raise ContractError("dates and values must have equal length")
        object.__setattr__(self, "dates", frozen(dates))
        object.__setattr__(self, "values", frozen(values))

    @property
    def warmup(self) -> int:
        return self.window - 1

    def __len__(self):
        return self.values.size

    def tail_from(self, start_index: int) -> "DiffSeries":
        return DiffSeries(self.dates[start_index:], self.values[start_index:], self.spec, self.window, self.asset_id)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


def _recursive_weights(d, lam, tau, max_weights):
    k = np.arange(1, max_weights, dtype=np.float64)
    w = np.concatenate(([1.0], np.cumprod(-(d - k + 1.0) / k)))
    if lam != 0.0:
        # one rounding per weight instead of k accumulated ones from multiplying
        # the recursion by e^{-lam} at every step
        w[1:] *= np.exp(-lam * k)
    stop = np.flatnonzero((np.abs(w[1:]) < tau) | (w[1:] == 0.0))
    if stop.size:
        return w[: stop[0] + 1]
    warnings.warn(
        f"weight generation hit the {max_weights}-weight cap (d={d}, tau={tau}); window truncated",
        WeightCapWarning,
        stacklevel=3,
    )
    return w


def frac_weights(d: float, tau: float = DEFAULT_TAU, max_weights: int = MAX_WEIGHTS) -> WeightVector:
    """Fixed-width weights of ``(1 - B)^d``.

    Generation stops at the first ``k >= 1`` with ``|w_k| < tau`` (that weight is
    dropped) or when a weight is exactly zero, as happens for integer ``d``.

    >>> frac_weights(1.0).weights.tolist()
    [1.0, -1.0]
    """
    if d < 0:
        raise ContractError(f"d must be >= 0, got {d}")
    kind = "integer" if float(d).is_integer() else "fractional"
    spec = DiffSpec(kind, d, 0.0, tau)
    return WeightVector(_recursive_weights(float(d), 0.0, tau, max_weights), spec)


def tempered_weights(d: float, lam: float, tau: float = DEFAULT_TAU, max_weights: int = MAX_WEIGHTS) -> WeightVector:
    """Fixed-width weights of the tempered operator ``(1 - e^{-lam} B)^d``.

    Equivalent to multiplying each step of the fractional recursion by
    ``e^{-lam}``: ``w_k = e^{-k lam} (-1)^k C(d, k)``. ``lam = 0`` reproduces
    :func:`frac_weights`.
    """
    if d < 0 or lam < 0:
        raise ContractError(f"d and lam must be non-negative, got d={d}, lam={lam}")
    spec = DiffSpec("tempered", d, lam, tau)
    return WeightVector(_recursive_weights(float(d), float(lam), tau, max_weights), spec)


def weights_for(spec: DiffSpec, max_weights: int = MAX_WEIGHTS) -> WeightVector:
    if spec.kind == "tempered":
        return tempered_weights(spec.d, spec.lam, spec.tau, max_weights)
    w = frac_weights(spec.d, spec.tau, max_weights)
    return WeightVector(w.weights, spec)


def binomial_weight(d: float, k: int) -> float:
    """``(-1)^k C(d, k)`` by its product form, independent of the recursion."""
    out = 1.0
    for i in range(k):
        out *= (i - d) / (i + 1)
    return out


# ---------------------------------------------------------------------------
# apply / invert
# ---------------------------------------------------------------------------


def _weights_array(w):
    return w.weights if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)


def apply_diff(x, w) -> DiffSeries | np.ndarray:
    """Fixed-width differencing ``y_t = sum_k w_k x_{t-k}``.

    The first ``window - 1`` observations produce no output. A
    :class:`LogSeries` input gives a dated :class:`DiffSeries`; a bare array
    gives an array.
    """
    weights = _weights_array(w)
    values = x.values if isinstance(x, LogSeries) else check_1d(x, "x")
    if values.size < weights.size:
        raise InsufficientDataError(
            f"series of length {values.size} is shorter than the weight window {weights.size}"
        )
    out = np.convolve(values, weights, mode="valid")
    if not isinstance(x, LogSeries):
        return out
    spec = w.spec if isinstance(w, WeightVector) else DiffSpec("fractional", 0.0)
    return DiffSeries(x.dates[weights.size - 1 :], out, spec, weights.size, x.asset_id)


def invert_diff(y, w, history) -> LogSeries | np.ndarray:
    """Undo :func:`apply_diff` given the ``window - 1`` values before the first output.

    Solves ``x_t = y_t - sum_{k>=1} w_k x_{t-k}`` forward in time.
    """
    weights = _weights_array(w)
    history = np.asarray(history, dtype=np.float64).ravel()
    if history.size != weights.size - 1:
        raise ContractError(f"history must hold window-1={weights.size - 1} values, got {history.size}")
    values = y.values if isinstance(y, DiffSeries) else check_1d(y, "y", min_length=0)
    if isinstance(y, DiffSeries) and isinstance(w, WeightVector) and y.window != w.window:
        raise ContractError("weight vector does not match the differenced series")
    if weights.size == 1:
        out = values.copy()
    else:
        zi = lfiltic([1.0], weights, history[::-1])
        out, _ = lfilter([1.0], weights, values, zi=zi)
    if isinstance(y, DiffSeries):
        return LogSeries(y.asset_id, y.dates, out)
    return out


def predict_price(pred_diff: float, w, recent_log_prices) -> float:
    """Price implied by a one-step prediction of the differenced value.

    ``recent_log_prices`` are the last ``window - 1`` log prices, oldest first.
    """
    weights = _weights_array(w)
    recent = np.asarray(recent_log_prices, dtype=np.float64).ravel()
    if recent.size != weights.size - 1:
        raise ContractError(f"need {weights.size - 1} recent log prices, got {recent.size}")
    return float(np.exp(pred_diff - np.dot(weights[1:], recent[::-1])))


def predict_prices(pred_diffs, w, log_prices, start_index) -> np.ndarray:
    """Vectorised :func:`predict_price`.

    ``pred_diffs[j]`` is the predicted differenced value at position
    ``start_index + j`` of ``log_prices``; only earlier log prices are used.
    """
    weights = _weights_array(w)
    pred = np.asarray(pred_diffs, dtype=np.float64)
    K = weights.size - 1
    if start_index < K:
        raise ContractError("not enough history before the first prediction")
    idx = start_index + np.arange(pred.size)
    if K == 0:
        return np.exp(pred)
    lagged = np.stack([log_prices[idx - k] for k in range(1, K + 1)], axis=1)
    return np.exp(pred - lagged @ weights[1:])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_diff_series(y: DiffSeries, path) -> tuple[Path, Path]:
    """Write ``Date,Value`` CSV plus a JSON sidecar with d, lambda, tau and window."""
    path = Path(path)
    lines = ["Date,Value"] + [f"{day},{float(v)!r}" for day, v in zip(y.dates, y.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = dict(y.spec.to_dict(), window=y.window, asset_id=y.asset_id)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, sidecar


def load_diff_series(path) -> DiffSeries:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()[1:] if line]
    dates = as_dates([r[0] for r in rows])
    values = np.array([float(r[1]) for r in rows])
    return DiffSeries(dates, values, DiffSpec.from_dict(meta), int(meta["window"]), meta.get("asset_id", "asset"))
