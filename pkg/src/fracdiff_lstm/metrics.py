"""Forecast errors and trading performance statistics, plus table rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_1d, check_same_length
from .exceptions import ContractError, DomainError
from .trading import EquityLine

TRADING_DAYS = 252


@dataclass(frozen=True)
class ForecastMetrics:
    """RMSE and MAE in price units; MAPE as a fraction (None if undefined)."""

    rmse: float
    mae: float
    mape: float | None


def forecast_metrics(actual, predicted, require_mape: bool = False) -> ForecastMetrics:
    """Root mean squared, mean absolute and mean absolute percentage errors.

    When an actual value is zero MAPE is undefined: it is reported as None,
    or :class:`DomainError` is raised (carrying the other two metrics as
    ``partial``) when ``require_mape`` is set.
    """
    y = check_1d(actual, "actual")
    yhat = check_1d(predicted, "predicted")
    check_same_length(y, yhat, ("actual", "predicted"))
    err = yhat - y
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    if np.any(y == 0):
        if require_mape:
            exc = DomainError("MAPE is undefined when an actual value is zero")
            exc.partial = ForecastMetrics(rmse, mae, None)
            raise exc
        return ForecastMetrics(rmse, mae, None)
    return ForecastMetrics(rmse, mae, float(np.mean(np.abs(err / y))))


@dataclass(frozen=True)
class TradingMetrics:
    """Annualised return and volatility, max drawdown, information and Sortino ratios.

    All values are fractions; ``ir`` and ``sr`` are None when undefined.
    """

    arc: float
    asd: float
    md: float
    ir: float | None
    sr: float | None


def information_ratio(arc: float, asd: float) -> float | None:
    """``arc / asd``, or None when the volatility is zero."""
    return arc / asd if asd > 0 else None


def max_drawdown(path) -> float:
    """Largest peak-to-trough decline as a fraction of the peak."""
    path = np.asarray(path, dtype=np.float64)
    peak = np.maximum.accumulate(path)
    return float(np.max((peak - path) / peak))


def trading_metrics(e) -> TradingMetrics:
    """Performance statistics of an equity line.

    ``e`` is an :class:`EquityLine` (its starting value is included) or a
    plain sequence of equity values. With ``N`` daily returns the horizon is
    ``N / 252`` years.
    """
    path = e.path if isinstance(e, EquityLine) else check_1d(e, "equity", min_length=2)
    if path.size < 2:
        raise ContractError("need at least two equity points")
    if np.any(path <= 0):
        raise DomainError("equity must stay positive")
    returns = path[1:] / path[:-1] - 1.0
    years = returns.size / TRADING_DAYS
    arc = float((path[-1] / path[0]) ** (1.0 / years) - 1.0)
    asd = float(np.sqrt(TRADING_DAYS) * np.std(returns, ddof=1)) if returns.size > 1 else 0.0
    negative = returns[returns < 0]
    asd_down = float(np.sqrt(TRADING_DAYS) * np.std(negative, ddof=1)) if negative.size > 1 else 0.0
    ir = information_ratio(arc, asd)
    sr = information_ratio(arc, asd_down)
    return TradingMetrics(arc, asd, max_drawdown(path), ir, sr)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

TRADING_COLUMNS = (("ARC", "arc", True), ("ASD", "asd", True), ("MD", "md", True), ("IR", "ir", False), ("SR", "sr", False))
FORECAST_COLUMNS = (("RMSE", "rmse", False), ("MAE", "mae", False), ("MAPE", "mape", True))
MISSING = "NA"


def _cell(value, percent):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return MISSING
    return f"{value * 100 if percent else value:.2f}"


@dataclass(frozen=True)
class Table:
    """Rendered comparison table: one row per method, values at 2 dp.

    Percent columns (ARC, ASD, MD, MAPE) are multiplied by 100.
    """

    title: str
    columns: tuple
    rows: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("Method",) + self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_text(self) -> str:
        header = ("Method",) + self.columns
        body = [header] + [tuple(r) for r in self.rows]
        widths = [max(len(r[i]) for r in body) for i in range(len(header))]
        lines = [self.title] if self.title else []
        for n, row in enumerate(body):
            cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_csv(text: str) -> dict:
        """Read a table CSV back into ``{method: {column: float or None}}``."""
        reader = list(csv.reader(io.StringIO(text)))
        header = reader[0][1:]
        return {
            row[0]: {col: (None if v == MISSING else float(v)) for col, v in zip(header, row[1:])}
            for row in reader[1:]
        }


def report_tables(results: dict, title: str = "") -> Table:
    """Comparison table from ``{method: TradingMetrics or ForecastMetrics}``.

    All entries must be of the same kind; row order follows the mapping.
    """
    if not results:
        raise ContractError("a table needs at least one method")
    kinds = {type(m) for m in results.values()}
    if kinds == {TradingMetrics}:
        layout = TRADING_COLUMNS
    elif kinds == {ForecastMetrics}:
        layout = FORECAST_COLUMNS
    else:
        raise ContractError("cannot mix trading and forecast metrics in one table")
    rows = tuple(
        (method,) + tuple(_cell(asdict(m)[field], pct) for _, field, pct in layout) for method, m in results.items()
    )
    return Table(title, tuple(name for name, _, _ in layout), rows)
