"""Bundled synthetic dataset so the whole pipeline runs offline.

Four assets of roughly 2520 business days (2014-2023), each with its own
fixed-date holiday calendar. Daily log returns are drift plus long-memory
noise, so the assets differ in how much differencing they need.

Regenerate the committed files with ``python -m fracdiff_lstm.pipeline.fixture``.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from ..longmem import simulate_longmem
from ..timeseries import PriceSeries, save_csv

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "fixture"
CONFIG = FIXTURE_DIR / "config.yaml"
SEED = 20240101
START, END = "2014-01-01", "2023-12-31"

# asset id -> (start level, annual drift, daily vol, memory of returns, fixed holidays MM-DD)
ASSETS = {
    "SYN_A": (1850.0, 0.09, 0.011, 0.08, ("01-01", "07-04", "12-25")),
    "SYN_B": (2400.0, 0.01, 0.013, 0.0, ("01-01", "05-01", "05-03", "11-11", "12-25", "12-26")),
    "SYN_C": (9500.0, 0.06, 0.012, 0.04, ("01-01", "05-01", "10-03", "12-24", "12-25", "12-26", "12-31")),
    "SYN_D": (16000.0, 0.07, 0.013, 0.12, ("01-01", "01-02", "01-03", "05-03", "05-05", "12-31")),
}


def calendar(holidays) -> np.ndarray:
    days = np.arange(np.datetime64(START), np.datetime64(END) + 1)
    business = np.is_busday(days)
    month_day = np.array([str(d)[5:] for d in days])
    return days[business & ~np.isin(month_day, list(holidays))]


def make_asset(asset_id: str, index: int) -> PriceSeries:
    level, drift, vol, d, holidays = ASSETS[asset_id]
    dates = calendar(holidays)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        noise = simulate_longmem(d, 0.0, dates.size - 1, seed=SEED + index)
    noise = noise / noise.std()
    returns = drift / 252 + vol * noise
    log_price = np.log(level) + np.concatenate(([0.0], np.cumsum(returns)))
    return PriceSeries(asset_id, dates, np.round(np.exp(log_price), 2))


def write_fixture(dest=FIXTURE_DIR) -> list[Path]:
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    return [save_csv(make_asset(a, i), dest / f"{a}.csv") for i, a in enumerate(ASSETS)]


if __name__ == "__main__":
    for path in write_fixture():
        print(path)
