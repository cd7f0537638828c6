"""Minimal SVG plots for the report CSVs (line, grouped bar, scatter)."""
from __future__ import annotations

import math
from html import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22")


def _nice_ticks(lo, hi, n=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0]
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    return f"{v:.3g}"


class _Axes:
    def __init__(self, xlim, ylim, logy=False):
        self.logy = logy
        self.x0, self.x1 = xlim
        self.y0, self.y1 = (math.log10(ylim[0]), math.log10(ylim[1])) if logy else ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        if self.logy:
            y = math.log10(max(y, 1e-300))
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.ph


def _frame(ax, title, xlabel, ylabel, xticks=None, xticklabels=None):
    out = [f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{ax.pw}" height="{ax.ph}" '
           f'fill="none" stroke="black"/>',
           f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<text x="{MARGIN["left"] + ax.pw / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
           f'font-size="12">{escape(xlabel)}</text>',
           f'<text x="16" y="{MARGIN["top"] + ax.ph / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 16 {MARGIN["top"] + ax.ph / 2})">{escape(ylabel)}</text>']
    if ax.logy:
        yt = [10.0 ** k for k in range(math.floor(ax.y0), math.ceil(ax.y1) + 1) if ax.y0 <= k <= ax.y1]
    else:
        yt = [t for t in _nice_ticks(ax.y0, ax.y1) if ax.y0 <= t <= ax.y1]
    for t in yt:
        y = ax.py(t)
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{y:.1f}" x2="{MARGIN["left"]}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 7}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{_fmt(t)}</text>')
    if xticks is None:
        xticks = [t for t in _nice_ticks(ax.x0, ax.x1) if ax.x0 <= t <= ax.x1]
        xticklabels = [_fmt(t) for t in xticks]
    base = MARGIN["top"] + ax.ph
    for t, lab in zip(xticks, xticklabels):
        x = ax.px(t)
        out.append(f'<line x1="{x:.1f}" y1="{base}" x2="{x:.1f}" y2="{base + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{base + 17}" text-anchor="middle" font-size="11">{escape(str(lab))}</text>')
    return out


def _legend(labels):
    out = []
    x = WIDTH - MARGIN["right"] + 12
    for k, lab in enumerate(labels):
        y = MARGIN["top"] + 8 + 18 * k
        out.append(f'<rect x="{x}" y="{y - 8}" width="12" height="10" fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{x + 17}" y="{y + 1}" font-size="11">{escape(str(lab))}</text>')
    return out


def _write(path, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
    with open(path, "w") as fh:
        fh.write(head + "\n".join(body) + "\n</svg>\n")


def line_plot(path, series, title="", xlabel="", ylabel="", logy=False, hline=None):
    """``series`` maps a label to (x, y) arrays. ``hline`` draws a dashed reference level."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()]) if series else np.zeros(1)
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()]) if series else np.ones(1)
    ys = ys[np.isfinite(ys)]
    if hline is not None:
        ys = np.r_[ys, hline]
    if logy:
        pos = ys[ys > 0]
        lo, hi = (float(pos.min()), float(pos.max())) if len(pos) else (1e-3, 1.0)
        ylim = (10 ** math.floor(math.log10(lo)), 10 ** math.ceil(math.log10(hi)))
    else:
        lo, hi = (float(ys.min()), float(ys.max())) if len(ys) else (0.0, 1.0)
        pad = 0.05 * (hi - lo or 1.0)
        ylim = (min(lo - pad, 0.0) if lo >= 0 else lo - pad, hi + pad)
    ax = _Axes((float(xs.min()), float(xs.max())), ylim, logy)
    body = _frame(ax, title, xlabel, ylabel)
    if hline is not None:
        y = ax.py(hline)
        body.append(f'<line x1="{MARGIN["left"]}" y1="{y:.1f}" x2="{MARGIN["left"] + ax.pw}" y2="{y:.1f}" '
                    f'stroke="gray" stroke-dasharray="5,4"/>')
    for k, (x, y) in enumerate(series.values()):
        pts = " ".join(f"{ax.px(a):.1f},{ax.py(b):.1f}" for a, b in zip(x, y) if math.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.6"/>')
    body += _legend(series.keys())
    _write(path, body)


def bar_plot(path, groups, series, title="", ylabel=""):
    """Grouped bars: ``series`` maps a label to one value per entry of ``groups``."""
    vals = np.array([v for vs in series.values() for v in vs], float)
    hi = float(np.nanmax(vals)) if len(vals) else 1.0
    ax = _Axes((0.0, float(len(groups))), (0.0, hi * 1.1 or 1.0))
    body = _frame(ax, title, "", ylabel, [k + 0.5 for k in range(len(groups))], list(groups))
    n = max(len(series), 1)
    width = 0.8 / n
    for s, vs in enumerate(series.values()):
        for g, v in enumerate(vs):
            if not math.isfinite(v):
                continue
            x0 = ax.px(g + 0.1 + s * width)
            x1 = ax.px(g + 0.1 + (s + 1) * width)
            y = ax.py(v)
            body.append(f'<rect x="{x0:.1f}" y="{y:.1f}" width="{x1 - x0:.1f}" '
                        f'height="{ax.py(0) - y:.1f}" fill="{PALETTE[s % len(PALETTE)]}"/>')
    body += _legend(series.keys())
    _write(path, body)


def scatter_plot(path, x, y, labels=None, title="", xlabel="", ylabel=""):
    """Points coloured by integer ``labels``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    labels = np.zeros(len(x), int) if labels is None else np.asarray(labels, int)
    pad_x = 0.05 * (np.ptp(x) or 1.0)
    pad_y = 0.05 * (np.ptp(y) or 1.0)
    ax = _Axes((float(x.min() - pad_x), float(x.max() + pad_x)), (float(y.min() - pad_y), float(y.max() + pad_y)))
    body = _frame(ax, title, xlabel, ylabel)
    for a, b, lab in zip(x, y, labels):
        body.append(f'<circle cx="{ax.px(a):.1f}" cy="{ax.py(b):.1f}" r="1.8" '
                    f'fill="{PALETTE[int(lab) % len(PALETTE)]}" fill-opacity="0.7"/>')
    _write(path, body)
