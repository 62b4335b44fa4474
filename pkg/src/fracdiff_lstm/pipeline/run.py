"""End-to-end pipeline: each stage reads and writes files under the output directory.

Layout (relative to ``cfg.out``)::

    assets/<id>/prices.csv
    assets/<id>/estimate/{sweep.csv, estimates.json}
    assets/<id>/diff/<method>.{csv,json}
    assets/<id>/train/{features_<method>.csv, features_<method>_scaler.json,
                       tuning_<method>.json, model_<method>.json}
    assets/<id>/predict/{<method>.csv, forecast_metrics.{csv,txt}}
    assets/<id>/backtest/{equity_<method>_<strategy>.csv, equity_buy_and_hold.csv,
                          metrics_<strategy>.{csv,txt}}
    assets/<id>/charts/{sweep.svg, equity_<strategy>.svg}
    portfolio/{equity_*.csv, metrics_<strategy>.{csv,txt}, equity_<strategy>.svg}
    manifest.json

Stages only look at earlier stages' files, so any of them can be rerun alone.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import traceback
import zlib
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..exceptions import ConfigError, ContractError, DataError, FracDiffLSTMError, InsufficientDataError, NumericError
from ..fracdiff import DiffSpec, apply_diff, load_diff_series, predict_prices, save_diff_series, weights_for
from ..indicators import build_features
from ..longmem import whittle_fit
from ..lstm.network import load_checkpoint, save_checkpoint
from ..lstm.training import fit, predict_series, tune
from ..metrics import Table, forecast_metrics, report_tables, trading_metrics
from ..stationarity import search_min_d
from ..timeseries import PriceSeries, as_dates, format_csv, load_csv, log_transform
from ..trading import EquityLine, buy_and_hold, gen_signals, portfolio_equity, run_backtest
from . import charts
from .fetch import atomic_write, fetch_prices

logger = logging.getLogger(__name__)

METHODS = ("integer", "deprado", "arfima", "artfima")
LABELS = {
    "integer": "Diff_1",
    "deprado": "FracDiff_DePrado",
    "arfima": "FracDiff_ARFIMA",
    "artfima": "TemperedDiff_ARTFIMA",
}
BUY_HOLD = "Buy_and_Hold"
STRATEGIES = ("long_short", "long_only")
ASSET_STEPS = ("ingest", "estimate", "diff", "train", "predict", "backtest")
GLOBAL_STEPS = ("portfolio", "chart")
STEPS = ASSET_STEPS + GLOBAL_STEPS
MANIFEST = "manifest.json"


class StepSkipped(Exception):
    """A stage has nothing to do (for example, no test-window rows)."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, ContractError)):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def derive_seed(seed: int, *keys) -> int:
    """Stable 32-bit seed from the run seed and a tuple of string/int keys."""
    words = [seed & 0xFFFFFFFF, seed >> 32]
    for key in keys:
        words.append(zlib.crc32(str(key).encode("utf-8")))
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def dump_json(path: Path, data) -> Path:
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_table(table: Table, stem: Path):
    atomic_write(stem.with_suffix(".csv"), table.to_csv())
    atomic_write(stem.with_suffix(".txt"), table.to_text())


class AssetRun:
    """Stages for one asset; every method reads its inputs from disk."""

    def __init__(self, cfg, asset_id: str, offline: bool = False):
        self.cfg = cfg
        self.asset = cfg.asset(asset_id)
        self.offline = offline
        self.root = cfg.out / "assets" / asset_id

    def dir(self, name: str) -> Path:
        path = self.root / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def prices(self) -> PriceSeries:
        path = self.root / "prices.csv"
        if not path.exists():
            raise InsufficientDataError(f"{self.asset.asset_id}: run the fetch step first")
        return load_csv(path, "generic", self.asset.asset_id)

    def train_log(self):
        s = self.cfg.split
        train = self.prices().between(s.train_start, s.train_end)
        return log_transform(train)

    # -- stages ---------------------------------------------------------------

    def ingest(self):
        a = self.asset
        if a.path is not None:
            if not a.path.exists():
                raise InsufficientDataError(f"{a.asset_id}: input file {a.path} does not exist")
            prices = load_csv(a.path, a.format, a.asset_id)
        else:
            prices, _ = fetch_prices(
                a.symbol, a.source, self.cfg.fetch_start, self.cfg.fetch_end, self.cfg.cache,
                offline=self.offline, base_urls=self.cfg.base_urls, asset_id=a.asset_id,
            )
        self.root.mkdir(parents=True, exist_ok=True)
        atomic_write(self.root / "prices.csv", format_csv(prices))

    def estimate(self):
        logp = self.train_log()
        dc = self.cfg.diff
        search = search_min_d(logp, dc.grid_start, dc.grid_end, dc.step, dc.tau, dc.adf_lags, dc.critical_value)
        arfima = whittle_fit(logp, "arfima")
        artfima = whittle_fit(logp, "artfima")
        out = self.dir("estimate")
        atomic_write(out / "sweep.csv", search.to_csv())
        dump_json(out / "estimates.json", {
            "asset_id": self.asset.asset_id,
            "train_rows": len(logp),
            "deprado": {"d": search.d_star, "tau": search.tau, "critical_value": search.critical_value, "lags": search.lags},
            "arfima": arfima.to_dict(),
            "artfima": artfima.to_dict(),
        })

    def specs(self) -> dict:
        path = self.root / "estimate" / "estimates.json"
        if not path.exists():
            raise InsufficientDataError(f"{self.asset.asset_id}: run the estimate step first")
        est = json.loads(path.read_text(encoding="utf-8"))
        tau = self.cfg.diff.tau
        return {
            "integer": DiffSpec("integer", 1.0, 0.0, tau),
            "deprado": DiffSpec("fractional", est["deprado"]["d"], 0.0, tau),
            "arfima": DiffSpec("fractional", max(est["arfima"]["d_hat"], 0.0), 0.0, tau),
            "artfima": DiffSpec("tempered", est["artfima"]["d_hat"], est["artfima"]["lambda_hat"], tau),
        }

    def diff(self):
        logp = log_transform(self.prices())
        out = self.dir("diff")
        for method, spec in self.specs().items():
            save_diff_series(apply_diff(logp, weights_for(spec)), out / f"{method}.csv")

    def features(self, method):
        """Feature matrix for ``method``, starting where every transform has output."""
        series = {}
        for m in METHODS:
            path = self.root / "diff" / f"{m}.csv"
            if not path.exists():
                raise InsufficientDataError(f"{self.asset.asset_id}: run the diff step first")
            series[m] = load_diff_series(path)
        start = max(s.dates[0] for s in series.values())
        return build_features(series[method], self.prices(), self.cfg.split, start=start)

    def train(self):
        out = self.dir("train")
        for method in METHODS:
            feats = self.features(method)
            feats.save(out / f"features_{method}.csv")
            result = tune(feats, self.cfg.space, self.cfg.budget, derive_seed(self.cfg.seed, self.asset.asset_id, method, "tune"))
            dump_json(out / f"tuning_{method}.json", {
                "best": result.best.to_dict(),
                "best_score": result.best_score,
                "log": list(result.log),
            })
            seed = derive_seed(self.cfg.seed, self.asset.asset_id, method, "final")
            spec = result.best
            net = spec.build(feats.X.shape[1], seed=seed)
            cfg = replace(spec.train, seed=seed)
            net, history = fit(net, feats, cfg, train_mask=feats.train_mask, val_mask=None)
            save_checkpoint(
                out / f"model_{method}.json",
                net,
                cfg.__dict__,
                scaler_ref=f"features_{method}_scaler.json",
                extra={"spec": replace(spec, train=cfg).to_dict(),
                       "train_loss": history["train_loss"]},
            )

    def predict(self):
        prices = self.prices()
        s = self.cfg.split
        if np.count_nonzero((prices.dates >= s.test_start) & (prices.dates <= s.test_end)) < 2:
            raise StepSkipped("no test-window rows")
        logp = np.log(prices.close)
        out = self.dir("predict")
        forecasts = {}
        for method in METHODS:
            feats = self.features(method)
            net, record = load_checkpoint(self.root / "train" / f"model_{method}.json")
            lookback = int(record["train_config"]["lookback"])
            preds = predict_series(net, feats, lookback, mask=feats.test_mask)
            if preds.values.size < 2:
                raise InsufficientDataError(f"{self.asset.asset_id}: fewer than 2 test predictions")
            spec = load_diff_series(self.root / "diff" / f"{method}.csv").spec
            idx = np.searchsorted(prices.dates, preds.target_dates)
            if np.any(np.diff(idx) != 1):
                raise ContractError("test predictions are not on consecutive trading dates")
            predicted = predict_prices(preds.values, weights_for(spec), logp, int(idx[0]))
            actual = prices.close[idx]
            decision_close = prices.close[idx - 1]
            lines = ["Date,decision_date,predicted_diff,predicted_price,actual_price,decision_price"]
            for row in zip(preds.target_dates, preds.dates, preds.values, predicted, actual, decision_close):
                lines.append(f"{row[0]},{row[1]}," + ",".join(repr(float(v)) for v in row[2:]))
            atomic_write(out / f"{method}.csv", "\n".join(lines) + "\n")
            forecasts[LABELS[method]] = forecast_metrics(actual, predicted)
        write_table(report_tables(forecasts, f"{self.asset.asset_id}: forecast errors on the test window"), out / "forecast_metrics")

    def predictions(self, method):
        path = self.root / "predict" / f"{method}.csv"
        if not path.exists():
            raise StepSkipped("no predictions")
        rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()[1:] if line]
        cols = list(zip(*rows))
        return {
            "date": as_dates(list(cols[0])),
            "decision_date": as_dates(list(cols[1])),
            "predicted_price": np.array(cols[3], dtype=np.float64),
            "decision_price": np.array(cols[5], dtype=np.float64),
        }

    def backtest(self):
        prices = self.prices()
        out = self.dir("backtest")
        tables = {st: {} for st in STRATEGIES}
        first = None
        for method in METHODS:
            p = self.predictions(method)
            first = p if first is None else first
            for strategy in STRATEGIES:
                signals = gen_signals(p["decision_price"], p["predicted_price"], p["decision_date"], strategy, self.cfg.cost)
                line = run_backtest(prices, signals)
                line.save(out / f"equity_{method}_{strategy}.csv")
                tables[strategy][LABELS[method]] = trading_metrics(line)
        bh = buy_and_hold(prices.between(first["decision_date"][0], first["date"][-1]), self.cfg.cost)
        bh.save(out / "equity_buy_and_hold.csv")
        for strategy in STRATEGIES:
            tables[strategy][BUY_HOLD] = trading_metrics(bh)
            title = f"{self.asset.asset_id}: {strategy} strategy on the test window"
            write_table(report_tables(tables[strategy], title), out / f"metrics_{strategy}")

    def chart(self):
        out = self.dir("charts")
        sweep = self.root / "estimate" / "sweep.csv"
        if sweep.exists():
            est = json.loads((self.root / "estimate" / "estimates.json").read_text(encoding="utf-8"))
            svg = charts.sweep_chart(*charts.read_sweep_csv(sweep.read_text(encoding="utf-8")),
                                     critical_value=est["deprado"]["critical_value"],
                                     title=f"{self.asset.asset_id}: ADF statistic and correlation against d")
            atomic_write(out / "sweep.svg", svg)
        _equity_charts(self.root / "backtest", out, self.asset.asset_id)


def _equity_charts(src: Path, out: Path, name: str):
    bh = src / "equity_buy_and_hold.csv"
    if not bh.exists():
        return
    for strategy in STRATEGIES:
        lines = {}
        for method in METHODS:
            path = src / f"equity_{method}_{strategy}.csv"
            if path.exists():
                e = EquityLine.from_csv(path.read_text(encoding="utf-8"))
                lines[LABELS[method]] = (e.dates, e.equity)
        e = EquityLine.from_csv(bh.read_text(encoding="utf-8"))
        lines[BUY_HOLD] = (e.dates, e.equity)
        svg = charts.equity_chart(lines, f"{name}: equity lines, {strategy}")
        atomic_write(out / f"equity_{strategy}.svg", svg)


def run_portfolio(cfg, asset_ids) -> None:
    out = cfg.out / "portfolio"

    def load(asset_id, name):
        path = cfg.out / "assets" / asset_id / "backtest" / name
        return EquityLine.from_csv(path.read_text(encoding="utf-8")) if path.exists() else None

    tables = {st: {} for st in STRATEGIES}
    found = False
    for strategy in STRATEGIES:
        for method in METHODS + ("buy_and_hold",):
            name = f"equity_{method}.csv" if method == "buy_and_hold" else f"equity_{method}_{strategy}.csv"
            lines = [line for line in (load(a, name) for a in asset_ids) if line is not None]
            if len(lines) < 2:
                continue
            found = True
            out.mkdir(parents=True, exist_ok=True)
            line = portfolio_equity(lines)
            line.save(out / name)
            tables[strategy][BUY_HOLD if method == "buy_and_hold" else LABELS[method]] = trading_metrics(line)
    if not found:
        raise StepSkipped("fewer than two assets have backtests")
    for strategy in STRATEGIES:
        if tables[strategy]:
            write_table(report_tables(tables[strategy], f"Portfolio: {strategy} strategy"), out / f"metrics_{strategy}")


def run_charts(cfg, asset_ids) -> None:
    for asset_id in asset_ids:
        if (cfg.out / "assets" / asset_id).exists():
            AssetRun(cfg, asset_id).chart()
    portfolio = cfg.out / "portfolio"
    if portfolio.exists():
        _equity_charts(portfolio, portfolio, "Portfolio")


def _record(fn):
    start = time.perf_counter()
    try:
        fn()
        status = {"status": "ok"}
    except StepSkipped as exc:
        status = {"status": "skipped", "reason": str(exc)}
    except FracDiffLSTMError as exc:
        status = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "exit_code": exit_code_for(exc)}
    except Exception as exc:  # isolate unexpected failures to the asset
        logger.debug("unexpected failure\n%s", traceback.format_exc())
        status = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "exit_code": 1}
    return status, round(time.perf_counter() - start, 3)


def run_asset(cfg, asset_id: str, steps, offline: bool = False):
    """Run ``steps`` for one asset, stopping at the first failure."""
    run = AssetRun(cfg, asset_id, offline)
    statuses, timings, failed = {}, {}, False
    for step in steps:
        if failed:
            statuses[step] = {"status": "skipped", "reason": "an earlier step failed"}
            continue
        statuses[step], timings[step] = _record(getattr(run, step))
        failed = statuses[step]["status"] == "failed"
        logger.info("%s %s: %s", asset_id, step, statuses[step]["status"])
    return asset_id, statuses, timings


def file_inventory(root: Path) -> dict:
    files = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name != MANIFEST and not path.name.startswith(".tmp-"):
            files[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
    return files


def run_pipeline(cfg, steps=None, assets=None, offline: bool = False) -> dict:
    """Run the selected steps and write ``manifest.json``; returns the manifest."""
    steps = STEPS if steps is None else tuple(steps)
    unknown = [s for s in steps if s not in STEPS]
    if unknown:
        raise ConfigError(f"unknown step(s) {unknown}; expected a subset of {STEPS}")
    asset_ids = [a.asset_id for a in cfg.assets]
    if assets:
        for a in assets:
            cfg.asset(a)
        asset_ids = [a for a in asset_ids if a in set(assets)]
    cfg.out.mkdir(parents=True, exist_ok=True)

    asset_steps = [s for s in ASSET_STEPS if s in steps]
    results = []
    if asset_steps:
        if cfg.workers > 1 and len(asset_ids) > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.workers, len(asset_ids))) as pool:
                futures = [pool.submit(run_asset, cfg, a, asset_steps, offline) for a in asset_ids]
                results = [f.result() for f in futures]
        else:
            results = [run_asset(cfg, a, asset_steps, offline) for a in asset_ids]
    statuses = {a: s for a, s, _ in results}
    timings = {a: t for a, _, t in results}

    global_status, global_timing = {}, {}
    if "portfolio" in steps:
        global_status["portfolio"], global_timing["portfolio"] = _record(lambda: run_portfolio(cfg, asset_ids))
    if "chart" in steps:
        global_status["chart"], global_timing["chart"] = _record(lambda: run_charts(cfg, asset_ids))

    manifest = {
        "package_version": __version__,
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "steps": {"assets": statuses, "global": global_status},
        "files": file_inventory(cfg.out),
        "timings_seconds": {"assets": timings, "global": global_timing},
    }
    dump_json(cfg.out / MANIFEST, manifest)
    return manifest


def failures(manifest: dict):
    """``(where, step, record)`` for every failed step in a manifest."""
    out = []
    for asset_id, steps in manifest["steps"]["assets"].items():
        out += [(asset_id, step, rec) for step, rec in steps.items() if rec["status"] == "failed"]
    out += [("global", step, rec) for step, rec in manifest["steps"]["global"].items() if rec["status"] == "failed"]
    return out
