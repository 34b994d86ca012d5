"""CSV and SVG output with deterministic bytes."""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger(__name__)


class ReportError(OSError):
    pass


def _fmt(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def csv_text(rows, seed, config_hash):
    """RFC-4180 style CSV with ``tool_version``, ``seed`` and ``config_hash`` prepended."""
    if not rows:
        raise ReportError("no rows to write")
    columns = ["tool_version", "seed", "config_hash"]
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    for row in rows:
        full = {"tool_version": __version__, "seed": seed, "config_hash": config_hash, **row}
        writer.writerow([_fmt(full.get(c, "")) for c in columns])
    return buf.getvalue()


def svg_plot(xs, ys_by_label, title, xlabel, ylabel, logx=False, width=480, height=320):
    """Minimal line plot; one polyline per label."""
    pad = 50
    xs = [math.log10(x) if logx else x for x in xs]
    allys = [y for ys in ys_by_label.values() for y in ys if math.isfinite(y)]
    if not allys:
        allys = [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(allys), max(allys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">'
        f'{("log10 " if logx else "") + xlabel}</text>',
        f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" '
        f'text-anchor="middle">{ylabel}</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="10">{x0:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    for i, (label, ys) in enumerate(ys_by_label.items()):
        c = colours[i % len(colours)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
        for x, y in zip(xs, ys):
            if math.isfinite(y):
                parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{c}"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 14 * i}" font-size="10" fill="{c}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(rows, out_dir, name, seed, config_hash, chart=None):
    """Write ``<name>.csv`` and, when ``chart`` is given, ``<name>.svg``; returns the paths.

    ``chart`` is ``(x_key, [y_keys], title, logx)``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{name}.csv"]
        paths[0].write_bytes(csv_text(rows, seed, config_hash).encode("utf-8"))
        if chart is not None:
            xkey, ykeys, title, logx = chart
            if len(rows) == 1:
                log.warning("plot %s has a single row; emitting a single-point chart", name)
            xs = [float(r[xkey]) for r in rows]
            ys = {k: [float(r[k]) for r in rows] for k in ykeys}
            svg = svg_plot(xs, ys, title, xkey, ", ".join(ykeys), logx=logx)
            paths.append(out / f"{name}.svg")
            paths[1].write_bytes(svg.encode("utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return paths
