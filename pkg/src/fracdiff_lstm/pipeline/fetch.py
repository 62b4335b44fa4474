"""Download daily closes over HTTP with an on-disk cache.

Payloads are normalised to the generic ``Date,Close`` CSV before caching, so a
repeated fetch of the same range writes identical bytes. Files are written
to a temporary name and renamed, never left half-written.
"""

from __future__ import annotations

import datetime as dt
import logging
import os
import re
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path

from ..exceptions import DataError, FetchError, SourceError
from ..timeseries import PriceSeries, format_csv, parse_csv_text

logger = logging.getLogger(__name__)

DEFAULT_BASE_URLS = {
    "stooq": "https://stooq.com/q/d/l/",
    "yahoo": "https://query1.finance.yahoo.com/v7/finance/download/",
}
TIMEOUT = 30


def _epoch(day: str) -> int:
    return int(dt.datetime.fromisoformat(day).replace(tzinfo=dt.timezone.utc).timestamp())


def build_url(source: str, symbol: str, start: str, end: str, base_urls=None) -> str:
    base = dict(DEFAULT_BASE_URLS, **(base_urls or {}))
    if source not in base:
        raise SourceError(f"unknown source {source!r}")
    if source == "stooq":
        query = {"s": symbol.lower(), "i": "d", "d1": start.replace("-", ""), "d2": end.replace("-", "")}
        return base[source] + "?" + urllib.parse.urlencode(query)
    query = {"period1": _epoch(start), "period2": _epoch(end) + 86400, "interval": "1d", "events": "history"}
    return base[source] + urllib.parse.quote(symbol, safe="") + "?" + urllib.parse.urlencode(query)


def cache_path(cache_dir, source: str, symbol: str, start: str, end: str) -> Path:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", symbol)
    return Path(cache_dir) / source / f"{safe}_{start}_{end}.csv"


def atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _download(url: str) -> str:
    request = urllib.request.Request(url, headers={"User-Agent": "fracdiff-lstm/0.1"})
    try:
        with urllib.request.urlopen(request, timeout=TIMEOUT) as resp:
            return resp.read().decode("utf-8-sig")
    except urllib.error.HTTPError as exc:
        if exc.code == 404:
            raise SourceError(f"unknown symbol at {url} (HTTP 404)") from exc
        raise FetchError(f"HTTP {exc.code} fetching {url}") from exc
    except (urllib.error.URLError, OSError, UnicodeDecodeError) as exc:
        raise FetchError(f"failed to fetch {url}: {exc}") from exc


def fetch_prices(
    symbol: str,
    source: str,
    start: str,
    end: str,
    cache_dir,
    offline: bool = False,
    base_urls=None,
    asset_id: str | None = None,
    downloader=_download,
) -> tuple[PriceSeries, Path]:
    """Return ``(prices, cached_file)`` for ``symbol`` between ``start`` and ``end``.

    A cache hit never touches the network. In ``offline`` mode a miss raises
    :class:`FetchError`. A payload that does not parse raises
    :class:`SourceError` and nothing is written.
    """
    target = cache_path(cache_dir, source, symbol, start, end)
    asset_id = asset_id or symbol
    if target.exists():
        logger.info("cache hit %s", target)
        return parse_csv_text(target.read_text(encoding="utf-8"), "generic", asset_id), target
    if offline:
        raise FetchError(f"{symbol} ({source}, {start}..{end}) is not cached and offline mode is on")
    url = build_url(source, symbol, start, end, base_urls)
    logger.info("fetching %s", url)
    payload = downloader(url)
    try:
        prices = parse_csv_text(payload, source, asset_id).between(start, end)
    except DataError as exc:
        raise SourceError(f"{source} returned an unusable payload for {symbol}: {exc}") from exc
    atomic_write(target, format_csv(prices))
    return prices, target
