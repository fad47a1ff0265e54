"""Minimal standalone SVG line charts.

Output depends only on the data, so charts of the same input are
byte-identical.
"""

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInput

WIDTH, HEIGHT = 800, 600
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
MARGIN = dict(left=80, right=170, top=40, bottom=60)
N_TICKS = 5


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _label(v):
    return f"{v:.4g}"


def _range(values, log):
    lo, hi = float(np.min(values)), float(np.max(values))
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        pad = 0.5 if lo == 0 else 0.1 * abs(lo)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, log):
    if log:
        first, last = math.ceil(lo), math.floor(hi)
        if last >= first:
            return [(e, 10.0 ** e) for e in range(first, last + 1)]
    return [(v, 10.0 ** v if log else v) for v in np.linspace(lo, hi, N_TICKS)]


def line_chart(series, x_label="x", y_label="y", logx=False, title=None):
    """Render ``series`` (a list of (name, xs, ys)) as an SVG document.

    Non-finite points split a line into separate pieces.  A series with a
    single finite point is drawn as a marker.
    """
    if not series:
        raise InvalidInput("nothing to plot")
    if len(series) > len(PALETTE):
        raise InvalidInput(f"at most {len(PALETTE)} series per chart")
    cleaned = []
    for name, xs, ys in series:
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        if xs.shape != ys.shape:
            raise InvalidInput(f"series {name!r}: x and y lengths differ")
        ok = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            ok &= xs > 0
        cleaned.append((str(name), xs, ys, ok))
    all_x = np.concatenate([xs[ok] for _, xs, _, ok in cleaned])
    all_y = np.concatenate([ys[ok] for _, _, ys, ok in cleaned])
    if all_x.size == 0:
        raise InvalidInput("no finite points to plot")
    x0, x1 = _range(all_x, logx)
    y0, y1 = _range(all_y, False)
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        v = math.log10(x) if logx else x
        return left + (v - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="24" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for pos, value in _ticks(x0, x1, logx):
        X = left + (pos - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{_fmt(X)}" y1="{top + ph}" x2="{_fmt(X)}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(X)}" y="{top + ph + 20}" text-anchor="middle">{_label(value)}</text>')
    for pos, value in _ticks(y0, y1, False):
        Y = py(pos)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(Y)}" x2="{left}" y2="{_fmt(Y)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(Y + 4)}" text-anchor="end">{_label(value)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'{escape(x_label)}{" (log scale)" if logx else ""}</text>')
    out.append(f'<text x="20" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {top + ph / 2:.2f})">{escape(y_label)}</text>')

    for i, (name, xs, ys, ok) in enumerate(cleaned):
        color = PALETTE[i]
        out.append(f'<g class="series" data-name="{escape(name, {chr(34): "&quot;"})}">')
        # split into runs of consecutive plottable points
        runs, current = [], []
        for x, y, good in zip(xs, ys, ok):
            if good:
                current.append((x, y))
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        for run in runs:
            if len(run) == 1:
                x, y = run[0]
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="4" fill="{color}"/>')
            else:
                pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in run)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append("</g>")
        ly = top + 10 + 20 * i
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
