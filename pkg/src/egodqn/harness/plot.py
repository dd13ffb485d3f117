"""Self-contained SVG charts: running-mean learning curves and stability bars."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from egodqn.harness.metrics import AGGREGATE_HEADER, RUN_HEADER, SUMMARY_HEADER, MetricsLog, read_rows

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000",
]

WIDTH, HEIGHT = 760, 440
MARGIN = dict(left=60, right=190, top=30, bottom=50)


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt_tick(t: float) -> str:
    return f"{t:g}"


def load_curve(path) -> tuple[str, np.ndarray, np.ndarray]:
    """(label, episodes, running-mean returns) from a run or aggregate CSV."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    header = text.split("\n", 1)[0].strip().split(",")
    if header == RUN_HEADER:
        m = MetricsLog.from_csv(text)
        label = f"{path.parent.name} {path.stem}" if path.parent.name else path.stem
        return label, np.array(m.episodes, dtype=float), m.running_mean()
    if header == AGGREGATE_HEADER:
        rows = read_rows(path, AGGREGATE_HEADER)
        eps = np.array([float(r["episode"]) for r in rows])
        vals = np.array([float(r["mean_running_return"]) for r in rows])
        return path.stem, eps, vals
    raise ValueError(f"{path}: not a run or aggregate CSV (header {','.join(header)})")


def _frame(parts, x_ticks, y_ticks, sx, sy, x_label, y_label, title):
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    parts.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
                 f'fill="none" stroke="#444" stroke-width="1"/>')
    for t in y_ticks:
        y = sy(t)
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" stroke="#ddd" stroke-width="0.5"/>')
        parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#444"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt_tick(t)}</text>')
    for t in x_ticks:
        x = sx(t)
        parts.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 5}" stroke="#444"/>')
        parts.append(f'<text x="{x:.2f}" y="{bottom + 18}" text-anchor="middle" font-size="11">{_fmt_tick(t)}</text>')
    parts.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">'
                 f'{escape(x_label)}</text>')
    parts.append(f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(y_label)}</text>')
    if title:
        parts.append(f'<text x="{(left + right) / 2:.1f}" y="18" text-anchor="middle" font-size="14">'
                     f'{escape(title)}</text>')


def _svg(parts) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
    return head + "\n".join(parts) + "\n</svg>\n"


def line_chart(series, title="Running mean reward", x_label="episode", y_label="running mean reward",
               y_range=(0.0, 5.0)) -> str:
    """``series``: list of (label, xs, ys). One polyline and legend entry per series."""
    if not series:
        raise ValueError("nothing to plot")
    x_max = max(float(np.max(xs)) for _, xs, _ in series)
    x_min = min(float(np.min(xs)) for _, xs, _ in series)
    y_lo, y_hi = y_range
    y_lo = min(y_lo, min(float(np.min(ys)) for _, _, ys in series))
    y_hi = max(y_hi, max(float(np.max(ys)) for _, _, ys in series))
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]

    def sx(x):
        span = (x_max - x_min) or 1.0
        return left + (x - x_min) / span * (right - left)

    def sy(y):
        return bottom - (y - y_lo) / ((y_hi - y_lo) or 1.0) * (bottom - top)

    parts = []
    _frame(parts, nice_ticks(x_min, x_max), nice_ticks(y_lo, y_hi), sx, sy, x_label, y_label, title)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}">'
                     f'<title>{escape(label)}</title></polyline>')
        ly = top + 10 + 18 * i
        parts.append(f'<g class="legend"><line x1="{right + 12}" y1="{ly}" x2="{right + 36}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>'
                     f'<text x="{right + 42}" y="{ly + 4}" font-size="11">{escape(label)}</text></g>')
    return _svg(parts)


def bar_chart(labels, values, title="Mean standard deviation after convergence", y_label="stability") -> str:
    if not labels:
        raise ValueError("nothing to plot")
    vals = [0.0 if math.isnan(v) else float(v) for v in values]
    y_hi = max(vals + [1e-9]) * 1.1
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]

    def sy(y):
        return bottom - y / y_hi * (bottom - top)

    parts = []
    _frame(parts, [], nice_ticks(0.0, y_hi), lambda x: x, sy, "", y_label, title)
    slot = (right - left) / len(labels)
    for i, (label, v) in enumerate(zip(labels, vals)):
        color = PALETTE[i % len(PALETTE)]
        x = left + i * slot + slot * 0.15
        parts.append(f'<rect class="bar" x="{x:.2f}" y="{sy(v):.2f}" width="{slot * 0.7:.2f}" '
                     f'height="{bottom - sy(v):.2f}" fill="{color}"><title>{escape(label)}: {v:.4f}</title></rect>')
        ly = top + 10 + 18 * i
        parts.append(f'<g class="legend"><rect x="{right + 12}" y="{ly - 6}" width="12" height="12" fill="{color}"/>'
                     f'<text x="{right + 30}" y="{ly + 4}" font-size="11">{escape(label)}</text></g>')
    return _svg(parts)


def plot_curves(paths, output, title="Running mean reward") -> Path:
    series = [load_curve(p) for p in paths]
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(line_chart(series, title=title), encoding="utf-8")
    return output


def plot_stability(summary_csv, output, variants=None) -> Path:
    rows = read_rows(summary_csv, SUMMARY_HEADER)
    if variants:
        wanted = set(variants)
        rows = [r for r in rows if r["variant"] in wanted]
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(bar_chart([r["variant"] for r in rows], [float(r["stability"]) for r in rows]),
                      encoding="utf-8")
    return output
