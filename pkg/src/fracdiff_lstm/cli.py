"""Command-line entry point: ``fracdiff-lstm <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
training error (1 for anything unexpected).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, FracDiffLSTMError
from .pipeline import charts
from .pipeline.config import SOURCES, load_config
from .pipeline.fetch import atomic_write, fetch_prices
from .pipeline.fixture import CONFIG as FIXTURE_CONFIG
from .pipeline.run import STEPS, exit_code_for, failures, run_pipeline
from .trading import EquityLine

logger = logging.getLogger("fracdiff_lstm")

STEP_COMMANDS = {
    "fetch": "ingest",
    "estimate": "estimate",
    "diff": "diff",
    "train": "train",
    "predict": "predict",
    "backtest": "backtest",
    "portfolio": "portfolio",
    "chart": "chart",
}
HELP = {
    "fetch": "load or download each asset's prices into the output directory",
    "estimate": "estimate d (ADF search), ARFIMA d and ARTFIMA (d, lambda) on the training window",
    "diff": "write the four differenced series",
    "train": "build features, tune and train one LSTM per series",
    "predict": "predict the test window and score the forecasts",
    "backtest": "trade the forecasts and compare against buy and hold",
    "portfolio": "combine per-asset equity lines into equally weighted portfolios",
    "chart": "draw SVG charts (pipeline outputs, or a single --sweep/--equity file)",
    "run": "run every step in order",
}


def _common(parser):
    parser.add_argument("--config", help="pipeline YAML file, or 'fixture' for the bundled offline dataset")
    parser.add_argument("--out", help="output directory (overrides config and FRACDIFF_LSTM_OUT)")
    parser.add_argument("--seed", type=int, help="run seed (overrides config and FRACDIFF_LSTM_SEED)")
    parser.add_argument("--offline", action="store_true", help="never touch the network; use cached downloads only")
    parser.add_argument("--asset", action="append", help="restrict to this asset id (repeatable)")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdiff-lstm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STEP_COMMANDS) + ["run"]:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        _common(p)
        if name == "run":
            p.add_argument("--only", choices=STEPS, help="run a single step")
        if name == "fetch":
            p.add_argument("--symbol", help="fetch one remote symbol instead of the configured assets")
            p.add_argument("--source", choices=SOURCES, default="stooq")
            p.add_argument("--start", default="2014-01-01")
            p.add_argument("--end", default="2023-12-31")
        if name == "chart":
            p.add_argument("--sweep", help="sweep CSV (d,adf_stat,pearson_corr) to chart")
            p.add_argument("--equity", nargs="+", help="equity CSVs to chart together, labelled by file name")
    return parser


def _config(args):
    if args.config is None:
        raise ConfigError("--config is required for this command")
    if args.config == "fixture":
        return load_config(FIXTURE_CONFIG, args.out, args.seed, out_base=Path.cwd())
    return load_config(args.config, args.out, args.seed)


def _standalone_fetch(args) -> int:
    out = Path(args.out or ".")
    prices, path = fetch_prices(args.symbol, args.source, args.start, args.end, out / "cache", offline=args.offline)
    print(f"{len(prices)} rows -> {path}")
    return 0


def _standalone_chart(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        svg = charts.sweep_chart(*charts.read_sweep_csv(Path(args.sweep).read_text(encoding="utf-8")))
        target = out / (Path(args.sweep).stem + ".svg")
    else:
        lines = {}
        for name in args.equity:
            e = EquityLine.from_csv(Path(name).read_text(encoding="utf-8"))
            lines[Path(name).stem] = (e.dates, e.equity)
        svg = charts.equity_chart(lines)
        target = out / "equity.svg"
    atomic_write(target, svg)
    print(target)
    return 0


def _report(manifest) -> int:
    failed = failures(manifest)
    for where, step, rec in failed:
        print(f"FAILED {where}/{step}: {rec['error']}", file=sys.stderr)
    n_ok = sum(
        rec["status"] == "ok"
        for steps in manifest["steps"]["assets"].values()
        for rec in steps.values()
    )
    print(f"{n_ok} asset step(s) ok, {len(failed)} failed; {len(manifest['files'])} file(s) in manifest")
    return failed[0][2].get("exit_code", 1) if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fetch" and args.symbol:
            return _standalone_fetch(args)
        if args.command == "chart" and (args.sweep or args.equity):
            return _standalone_chart(args)
        cfg = _config(args)
        if args.command == "run":
            steps = [args.only] if args.only else None
        else:
            steps = [STEP_COMMANDS[args.command]]
        return _report(run_pipeline(cfg, steps, args.asset, args.offline))
    except FracDiffLSTMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
