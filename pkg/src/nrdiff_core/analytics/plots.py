"""Minimal SVG line plots for the experiment CSVs."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

from nrdiff_core.errors import ConfigError
from nrdiff_core.storage import read_csv_rows

Series = Mapping[str, Sequence[Tuple[float, float]]]

WIDTH = 640
HEIGHT = 400
MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _bounds(values: List[float]) -> Tuple[float, float]:
    low, high = min(values), max(values)
    if low == high:
        pad = abs(low) * 0.05 or 1.0
        return low - pad, high + pad
    return low, high


def _fmt(value: float) -> str:
    return f"{value:.4g}"


def render_line_plot(series: Series, title: str = "", x_label: str = "", y_label: str = "") -> str:
    """One polyline per series, shared axes, legend in the top-right corner."""

    points = [point for values in series.values() for point in values]
    finite = [(x, y) for x, y in points if math.isfinite(x) and math.isfinite(y)]
    if not finite:
        raise ConfigError("nothing to plot: every series is empty or non-finite")
    x_low, x_high = _bounds([x for x, _ in finite])
    y_low, y_high = _bounds([y for _, y in finite])
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x: float) -> float:
        return MARGIN + (x - x_low) / (x_high - x_low) * plot_w

    def py(y: float) -> float:
        return HEIGHT - MARGIN - (y - y_low) / (y_high - y_low) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{_fmt(x_low)}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">'
        f"{_fmt(x_high)}</text>",
        f'<text x="{MARGIN - 6}" y="{HEIGHT - MARGIN}" text-anchor="end">{_fmt(y_low)}</text>',
        f'<text x="{MARGIN - 6}" y="{MARGIN + 4}" text-anchor="end">{_fmt(y_high)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(y_label)}</text>',
    ]
    for number, (name, values) in enumerate(series.items()):
        color = PALETTE[number % len(PALETTE)]
        coords = " ".join(
            f"{px(x):.2f},{py(y):.2f}"
            for x, y in values
            if math.isfinite(x) and math.isfinite(y)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        legend_y = MARGIN + 16 * number
        parts.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{legend_y}" text-anchor="end" fill="{color}">'
            f"{escape(name)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def series_from_rows(
    rows: Sequence[Mapping[str, str]],
    x: str,
    ys: Sequence[str],
    group_by: Optional[Sequence[str]] = None,
) -> Dict[str, List[Tuple[float, float]]]:
    """Columns ``ys`` against ``x``; with ``group_by`` one series per distinct key tuple."""

    series: Dict[str, List[Tuple[float, float]]] = {}
    for row in rows:
        prefix = "/".join(row[key] for key in group_by) if group_by else ""
        for column in ys:
            name = f"{prefix} {column}".strip() if len(ys) > 1 or not prefix else prefix
            series.setdefault(name, []).append((float(row[x]), float(row[column])))
    return series


def plot_csv(
    csv_path: Path,
    x: str,
    ys: Sequence[str],
    group_by: Optional[Sequence[str]] = None,
    title: str = "",
    svg_path: Optional[Path] = None,
) -> Path:
    """Write ``<csv stem>.svg`` next to the CSV (or at ``svg_path``)."""

    csv_path = Path(csv_path)
    rows = read_csv_rows(csv_path)
    series = series_from_rows(rows, x, ys, group_by)
    target = Path(svg_path) if svg_path else csv_path.with_suffix(".svg")
    y_label = ys[0] if len(ys) == 1 else ""
    svg = render_line_plot(series, title or csv_path.stem, x, y_label)
    target.write_text(svg, encoding="utf-8")
    return target
