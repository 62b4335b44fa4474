"""Static SVG charts written by hand so identical inputs give identical bytes."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from ..exceptions import ChartError
from ..stationarity import CRITICAL_VALUE

WIDTH, HEIGHT = 800, 450
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [round(start + i * step, 10) for i in range(int((hi - start) / step + 1e-9) + 1)]


class _Axis:
    def __init__(self, lo, hi, pixel_lo, pixel_hi):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ChartError("axis range is not finite")
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.p0, self.p1 = pixel_lo, pixel_hi

    def __call__(self, v):
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]


def _polyline(xs, ys, color, cls):
    points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'


def _frame():
    x0, x1, y0, y1 = LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP
    return [
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]


def _y_ticks(axis, x, anchor, offset, color="black"):
    out = []
    for t in _ticks(axis.lo, axis.hi):
        y = axis(t)
        out.append(f'<line class="tick" x1="{x}" y1="{_fmt(y)}" x2="{x + (4 if anchor == "start" else -4)}" y2="{_fmt(y)}" stroke="{color}"/>')
        out.append(f'<text x="{x + offset}" y="{_fmt(y + 4)}" text-anchor="{anchor}" fill="{color}">{t:g}</text>')
    return out


def sweep_chart(d, adf, corr, critical_value: float = CRITICAL_VALUE, title: str = "ADF statistic and correlation") -> str:
    """Dual-axis chart of the d sweep: ADF statistic (left) and correlation (right).

    Grid points without a statistic (NaN) are skipped. A dashed rule marks the
    critical value on the ADF axis.
    """
    d, adf, corr = (np.asarray(v, dtype=np.float64) for v in (d, adf, corr))
    if d.size == 0 or not (d.size == adf.size == corr.size):
        raise ChartError("sweep chart needs non-empty, equal-length columns")
    ok = np.isfinite(adf) & np.isfinite(corr) & np.isfinite(d)
    if not ok.any():
        raise ChartError("sweep table has no finite rows")
    d, adf, corr = d[ok], adf[ok], corr[ok]
    x = _Axis(float(d.min()), float(d.max()), LEFT, WIDTH - RIGHT)
    left = _Axis(min(float(adf.min()), critical_value), max(float(adf.max()), critical_value), HEIGHT - BOTTOM, TOP)
    right = _Axis(float(corr.min()), float(corr.max()), HEIGHT - BOTTOM, TOP)
    x_right = WIDTH - RIGHT
    parts = _header(title) + _frame()
    parts.append(f'<line class="axis" x1="{x_right}" y1="{HEIGHT - BOTTOM}" x2="{x_right}" y2="{TOP}" stroke="black"/>')
    parts += _y_ticks(left, LEFT, "end", -6, PALETTE[0])
    parts += _y_ticks(right, x_right, "start", 6, PALETTE[1])
    for t in _ticks(x.lo, x.hi):
        parts.append(f'<text x="{_fmt(x(t))}" y="{HEIGHT - BOTTOM + 18}" text-anchor="middle">{t:g}</text>')
    parts.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle">d</text>')
    parts.append(f'<text x="15" y="{HEIGHT / 2:.0f}" fill="{PALETTE[0]}" transform="rotate(-90 15 {HEIGHT / 2:.0f})" text-anchor="middle">ADF statistic</text>')
    parts.append(f'<text x="{WIDTH - 12}" y="{HEIGHT / 2:.0f}" fill="{PALETTE[1]}" transform="rotate(90 {WIDTH - 12} {HEIGHT / 2:.0f})" text-anchor="middle">Pearson correlation</text>')
    cy = _fmt(left(critical_value))
    parts.append(
        f'<line class="critical" x1="{LEFT}" y1="{cy}" x2="{x_right}" y2="{cy}" stroke="gray" stroke-dasharray="6,4"/>'
    )
    parts.append(_polyline(x(d), left(adf), PALETTE[0], "adf"))
    parts.append(_polyline(x(d), right(corr), PALETTE[1], "corr"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def equity_chart(lines: dict, title: str = "Equity lines") -> str:
    """Multi-line equity chart with one legend entry per series.

    ``lines`` maps a label to ``(dates, equity)``; dates are datetime64[D].
    """
    if not lines:
        raise ChartError("equity chart needs at least one line")
    series = []
    for label, (dates, equity) in lines.items():
        dates = np.asarray(dates, dtype="datetime64[D]").astype(np.int64).astype(np.float64)
        equity = np.asarray(equity, dtype=np.float64)
        if dates.size == 0 or dates.size != equity.size or not np.all(np.isfinite(equity)):
            raise ChartError(f"equity line {label!r} is empty or malformed")
        series.append((label, dates, equity))
    all_dates = np.concatenate([s[1] for s in series])
    all_eq = np.concatenate([s[2] for s in series])
    x = _Axis(float(all_dates.min()), float(all_dates.max()), LEFT, WIDTH - RIGHT)
    y = _Axis(float(all_eq.min()), float(all_eq.max()), HEIGHT - BOTTOM, TOP)
    parts = _header(title) + _frame() + _y_ticks(y, LEFT, "end", -6)
    first, last = np.datetime64(int(all_dates.min()), "D"), np.datetime64(int(all_dates.max()), "D")
    parts.append(f'<text x="{LEFT}" y="{HEIGHT - BOTTOM + 18}" text-anchor="start">{first}</text>')
    parts.append(f'<text x="{WIDTH - RIGHT}" y="{HEIGHT - BOTTOM + 18}" text-anchor="end">{last}</text>')
    for i, (label, dates, equity) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        parts.append(_polyline(x(dates), y(equity), color, "equity"))
    for i, (label, _, _) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ly = TOP + 8 + 16 * i
        parts.append(
            f'<g class="legend-entry"><line x1="{LEFT + 10}" y1="{ly}" x2="{LEFT + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{LEFT + 36}" y="{ly + 4}">{escape(label)}</text></g>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def read_sweep_csv(text: str):
    rows = [line.split(",") for line in text.splitlines()[1:] if line.strip()]
    if not rows:
        raise ChartError("sweep CSV has no rows")
    arr = np.array(rows, dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2]
