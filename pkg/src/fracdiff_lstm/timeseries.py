"""Daily price series: data model, CSV ingestion, log transform and splits."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import frozen
from .exceptions import ContractError, DomainError, FormatError, InsufficientDataError, SplitError

logger = logging.getLogger(__name__)

FORMATS = ("generic", "yahoo", "stooq")


class DataWarning(UserWarning):
    """Rows were dropped while loading a price file."""


def as_dates(values) -> np.ndarray:
    """Coerce ISO strings, ``datetime.date`` objects or datetime64 to ``datetime64[D]``."""
    return np.asarray(values, dtype="datetime64[D]")


def _check_dates(dates):
    if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
        raise ContractError("dates must be strictly increasing")


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing prices of one asset."""

    asset_id: str
    dates: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        dates = as_dates(self.dates)
        close = np.asarray(self.close, dtype=np.float64)
        if dates.shape != close.shape or dates.ndim != 1:
            raise ContractError("dates and close must be 1-D and of equal length")
        if close.size < 2:
            raise InsufficientDataError(f"{self.asset_id}: a price series needs at least 2 rows")
        if not np.all(np.isfinite(close)) or np.any(close <= 0):
            raise DomainError(f"{self.asset_id}: prices must be finite and positive")
        _check_dates(dates)
        object.__setattr__(self, "dates", frozen(dates))
        object.__setattr__(self, "close", frozen(close))

    def __len__(self):
        return self.close.size

    def between(self, start, end) -> "PriceSeries":
        mask = (self.dates >= np.datetime64(start, "D")) & (self.dates <= np.datetime64(end, "D"))
        return PriceSeries(self.asset_id, self.dates[mask], self.close[mask])

    def before(self, end) -> "PriceSeries":
        """Rows dated on or before ``end``."""
        mask = self.dates <= np.datetime64(end, "D")
        return PriceSeries(self.asset_id, self.dates[mask], self.close[mask])


@dataclass(frozen=True)
class LogSeries:
    """Natural logarithms of a :class:`PriceSeries`, on the same dates."""

    asset_id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape or dates.ndim != 1:
            raise ContractError("dates and values must be 1-D and of equal length")
        _check_dates(dates)
        object.__setattr__(self, "dates", frozen(dates))
        object.__setattr__(self, "values", frozen(values))

    def __len__(self):
        return self.values.size

    def to_prices(self) -> PriceSeries:
        return PriceSeries(self.asset_id, self.dates, np.exp(self.values))

    def before(self, end) -> "LogSeries":
        mask = self.dates <= np.datetime64(end, "D")
        return LogSeries(self.asset_id, self.dates[mask], self.values[mask])


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test boundaries (inclusive).

    The validation window is the tail of the training window.
    """

    train_start: np.datetime64
    train_end: np.datetime64
    val_start: np.datetime64
    val_end: np.datetime64
    test_start: np.datetime64
    test_end: np.datetime64

    def __post_init__(self):
        for name in ("train_start", "train_end", "val_start", "val_end", "test_start", "test_end"):
            object.__setattr__(self, name, np.datetime64(getattr(self, name), "D"))
        ok = (
            self.train_start < self.val_start <= self.val_end <= self.train_end < self.test_start <= self.test_end
        )
        if not ok:
            raise ContractError(
                "split boundaries must satisfy train_start < val_start <= val_end <= train_end "
                "< test_start <= test_end"
            )

    @classmethod
    def study_default(cls) -> "SplitSpec":
        """Seven years of training (last two for validation), three years of test."""
        return cls("2014-01-01", "2020-12-31", "2019-01-01", "2020-12-31", "2021-01-01", "2023-12-31")

    def to_dict(self) -> dict:
        return {name: str(getattr(self, name)) for name in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

_REQUIRED = {
    "generic": ("date", "close"),
    "yahoo": ("date", "close"),
    "stooq": ("date", "close"),
}


def _parse_date(text: str, fmt: str):
    text = text.strip()
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        if fmt == "stooq" and len(text) == 8 and text.isdigit():
            return dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))
        raise


def parse_csv_text(text: str, fmt: str = "generic", asset_id: str = "asset") -> PriceSeries:
    """Parse CSV content; see :func:`load_csv` for the contract."""
    if fmt not in FORMATS:
        raise FormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty CSV file") from None
    columns = {name.strip().lower(): i for i, name in enumerate(header)}
    missing = [c for c in _REQUIRED[fmt] if c not in columns]
    if missing:
        raise FormatError(f"{fmt} CSV is missing column(s) {missing}; header was {header}")
    i_date, i_close = columns["date"], columns["close"]

    rows = {}
    rejected = 0
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            day = _parse_date(row[i_date], fmt)
            price = float(row[i_close])
        except (ValueError, IndexError):
            rejected += 1
            continue
        if not np.isfinite(price) or price <= 0:
            rejected += 1
            continue
        rows[day] = price  # duplicates: last occurrence wins
    if rejected:
        msg = f"{asset_id}: rejected {rejected} row(s) with unparsable or non-positive close"
        logger.warning(msg)
        warnings.warn(msg, DataWarning, stacklevel=3)
    if len(rows) < 2:
        raise InsufficientDataError(f"{asset_id}: fewer than 2 valid rows")
    days = sorted(rows)
    return PriceSeries(asset_id, as_dates(days), np.array([rows[d] for d in days]))


def load_csv(path, format: str = "generic", asset_id: str | None = None) -> PriceSeries:
    """Load daily closes from ``path``.

    Rows are sorted by date, rows with an unparsable or non-positive close are
    dropped (with a :class:`DataWarning` giving the count) and duplicate dates
    keep their last occurrence.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8-sig")
    return parse_csv_text(text, format, asset_id or path.stem)


def format_csv(p: PriceSeries) -> str:
    buf = io.StringIO()
    buf.write("Date,Close\n")
    for day, price in zip(p.dates, p.close):
        buf.write(f"{day},{float(price)!r}\n")
    return buf.getvalue()


def save_csv(p: PriceSeries, path) -> Path:
    """Write ``Date,Close`` with ISO dates and round-trip float precision."""
    path = Path(path)
    path.write_text(format_csv(p), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def log_transform(p):
    """Elementwise natural log of the closes.

    A :class:`PriceSeries` gives a :class:`LogSeries`; a bare sequence gives
    an array.
    """
    if isinstance(p, PriceSeries):
        return LogSeries(p.asset_id, p.dates, np.log(p.close))
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise DomainError("log_transform requires strictly positive prices")
    return np.log(arr)


def split(p: PriceSeries, s: SplitSpec, allow_empty_val: bool = False):
    """Return ``(train, val, test)`` partitions of ``p``.

    ``val`` is a sub-view of ``train``; ``test`` is disjoint from it.
    """

    def part(start, end, name):
        mask = (p.dates >= start) & (p.dates <= end)
        n = int(mask.sum())
        if n < 2:
            raise SplitError(f"{p.asset_id}: {name} partition [{start}, {end}] has {n} row(s)")
        return PriceSeries(p.asset_id, p.dates[mask], p.close[mask])

    train = part(s.train_start, s.train_end, "train")
    test = part(s.test_start, s.test_end, "test")
    try:
        val = part(s.val_start, s.val_end, "validation")
    except SplitError:
        if not allow_empty_val:
            raise
        val = None
    if val is not None and len(val) == len(train):
        if not allow_empty_val:
            raise SplitError(f"{p.asset_id}: validation window covers the whole training window")
    return train, val, test
