"""YAML pipeline configuration with environment-variable overrides."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..exceptions import ConfigError, ContractError
from ..lstm.training import DEFAULT_SPACE
from ..stationarity import CRITICAL_VALUE, SEARCH_TAU
from ..timeseries import FORMATS, SplitSpec
from ..trading import DEFAULT_COST

ENV_OUT = "FRACDIFF_LSTM_OUT"
ENV_SEED = "FRACDIFF_LSTM_SEED"
SOURCES = ("stooq", "yahoo")


@dataclass(frozen=True)
class AssetConfig:
    """One asset: either a local CSV ``path`` or a remote ``symbol`` at ``source``."""

    asset_id: str
    path: Path | None = None
    format: str = "generic"
    symbol: str | None = None
    source: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.asset_id,
            "path": None if self.path is None else str(self.path),
            "format": self.format,
            "symbol": self.symbol,
            "source": self.source,
        }


@dataclass(frozen=True)
class DiffConfig:
    tau: float = SEARCH_TAU
    grid_start: float = 0.0
    grid_end: float = 1.0
    step: float = 0.01
    adf_lags: int = 1
    critical_value: float = CRITICAL_VALUE


@dataclass(frozen=True)
class PipelineConfig:
    assets: tuple
    split: SplitSpec
    out: Path
    seed: int
    diff: DiffConfig = field(default_factory=DiffConfig)
    budget: int = 10
    space: dict = field(default_factory=lambda: dict(DEFAULT_SPACE))
    cost: float = DEFAULT_COST
    workers: int = 1
    cache_dir: Path | None = None
    fetch_start: str = "2014-01-01"
    fetch_end: str = "2023-12-31"
    base_urls: dict = field(default_factory=dict)

    @property
    def cache(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out / "cache"

    def asset(self, asset_id: str) -> AssetConfig:
        for a in self.assets:
            if a.asset_id == asset_id:
                return a
        raise ConfigError(f"unknown asset {asset_id!r}")

    def to_dict(self) -> dict:
        """Everything that influences results (the output directory excluded)."""
        return {
            "assets": [a.to_dict() for a in self.assets],
            "split": self.split.to_dict(),
            "seed": self.seed,
            "diff": self.diff.__dict__.copy(),
            "budget": self.budget,
            "space": self.space,
            "cost": self.cost,
            "fetch": {"start": self.fetch_start, "end": self.fetch_end},
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _parse_assets(items, base: Path):
    if not isinstance(items, list) or not items:
        raise ConfigError("config needs a non-empty 'assets' list")
    assets, seen = [], set()
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"assets[{i}] must be a mapping")
        asset_id = str(_require(item, "id", f"assets[{i}]"))
        if asset_id in seen:
            raise ConfigError(f"duplicate asset id {asset_id!r}")
        seen.add(asset_id)
        fmt = item.get("format", "generic")
        if fmt not in FORMATS:
            raise ConfigError(f"asset {asset_id}: unknown format {fmt!r}")
        path = item.get("path")
        symbol = item.get("symbol")
        source = item.get("source")
        if (path is None) == (symbol is None):
            raise ConfigError(f"asset {asset_id}: give exactly one of 'path' or 'symbol'")
        if symbol is not None and source not in SOURCES:
            raise ConfigError(f"asset {asset_id}: 'source' must be one of {SOURCES}")
        if path is not None:
            path = Path(path)
            path = path if path.is_absolute() else base / path
        assets.append(AssetConfig(asset_id, path, fmt, symbol, source))
    return tuple(assets)


def parse_config(data: dict, base: Path = Path("."), out=None, seed=None, env=None, out_base=None) -> PipelineConfig:
    """Build a :class:`PipelineConfig` from a parsed mapping.

    Precedence for ``out`` and ``seed``: explicit argument, then the
    ``FRACDIFF_LSTM_OUT`` / ``FRACDIFF_LSTM_SEED`` environment variables, then
    the file. Relative paths resolve against ``base``, except a relative
    output directory, which resolves against ``out_base`` when given.
    """
    env = os.environ if env is None else env
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    try:
        split_data = _require(data, "split", "config")
        split = SplitSpec(**{k: split_data[k] for k in SplitSpec.__dataclass_fields__})
    except (KeyError, TypeError, ValueError, ContractError) as exc:
        raise ConfigError(f"invalid split: {exc}") from exc

    seed = seed if seed is not None else env.get(ENV_SEED, data.get("seed"))
    if seed is None:
        raise ConfigError("a seed is required (config 'seed', --seed or FRACDIFF_LSTM_SEED)")
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer, got {seed!r}") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")

    out = out if out is not None else env.get(ENV_OUT, data.get("out", "out"))
    out = Path(out)
    out = out if out.is_absolute() else Path(out_base or base) / out

    diff = data.get("diff", {}) or {}
    tuning = data.get("tuning", {}) or {}
    fetch = data.get("fetch", {}) or {}
    try:
        diff_cfg = DiffConfig(**diff)
        space = dict(DEFAULT_SPACE)
        space.update(tuning.get("space", {}) or {})
        cache_dir = fetch.get("cache_dir")
        if cache_dir is not None:
            cache_dir = Path(cache_dir)
            cache_dir = cache_dir if cache_dir.is_absolute() else base / cache_dir
        cfg = PipelineConfig(
            assets=_parse_assets(data.get("assets"), base),
            split=split,
            out=out,
            seed=seed,
            diff=diff_cfg,
            budget=int(tuning.get("budget", 10)),
            space=space,
            cost=float(data.get("cost", DEFAULT_COST)),
            workers=int(data.get("workers", 1)),
            cache_dir=cache_dir,
            fetch_start=str(fetch.get("start", "2014-01-01")),
            fetch_end=str(fetch.get("end", "2023-12-31")),
            base_urls=dict(fetch.get("base_urls", {}) or {}),
        )
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if cfg.budget < 1 or cfg.workers < 1 or not 0 <= cfg.cost < 1:
        raise ConfigError("budget and workers must be >= 1 and cost in [0, 1)")
    return cfg


def load_config(path, out=None, seed=None, env=None, out_base=None) -> PipelineConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data, path.parent.resolve(), out, seed, env, out_base)
