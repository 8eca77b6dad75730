"""Minimal standalone SVG line plots (no plotting library needed).

Reference series are drawn in black and approximations in red; further
series take colours from a fixed palette.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
PANEL_W, PANEL_H = 640, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 30, 45


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    color: str | None = None
    dashed: bool = False


def _ticks(lo, hi, count=5):
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _panel(series, title, xlabel, ylabel, y_offset):
    xs = np.concatenate([np.asarray(s.x, float) for s in series])
    ys = np.concatenate([np.asarray(s.y, float) for s in series])
    finite = np.isfinite(ys)
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    y0, y1 = (float(np.min(ys[finite])), float(np.max(ys[finite]))) if finite.any() else (0.0, 1.0)
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (np.asarray(x, float) - x0) / (x1 - x0) * w

    def py(y):
        return y_offset + MARGIN_T + (1.0 - (np.asarray(y, float) - y0) / (y1 - y0)) * h

    out = [f'<rect x="{MARGIN_L}" y="{y_offset + MARGIN_T}" width="{w}" height="{h}" '
           'fill="none" stroke="#888"/>',
           f'<text x="{MARGIN_L + w / 2}" y="{y_offset + 18}" text-anchor="middle" '
           f'font-size="14">{escape(title)}</text>',
           f'<text x="{MARGIN_L + w / 2}" y="{y_offset + PANEL_H - 8}" text-anchor="middle" '
           f'font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{y_offset + MARGIN_T + h / 2}" font-size="12" '
           f'transform="rotate(-90 14 {y_offset + MARGIN_T + h / 2})" '
           f'text-anchor="middle">{escape(ylabel)}</text>']
    for tx in _ticks(x0, x1):
        out.append(f'<text x="{px(tx):.1f}" y="{y_offset + MARGIN_T + h + 15}" '
                   f'text-anchor="middle" font-size="10">{tx:.4g}</text>')
    for ty in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN_L - 5}" y="{py(ty):.1f}" text-anchor="end" '
                   f'font-size="10">{ty:.3g}</text>')
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        ok = np.isfinite(np.asarray(s.y, float))
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(np.asarray(s.x)[ok]),
                                                          py(np.asarray(s.y)[ok])))
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.3"{dash}/>')
        ly = y_offset + MARGIN_T + 14 * (i + 1)
        lx = MARGIN_L + w + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 25}" y="{ly}" font-size="11">{escape(s.label)}</text>')
    return out


def write_svg(path, panels, xlabel="", ylabel=""):
    """Write stacked panels; ``panels`` is a list of ``(title, [Series, ...])``."""
    body = []
    for i, (title, series) in enumerate(panels):
        body += _panel(series, title, xlabel, ylabel, i * PANEL_H)
    height = PANEL_H * len(panels)
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" '
                 f'height="{height}" viewBox="0 0 {PANEL_W} {height}" '
                 'font-family="sans-serif">\n')
        fh.write('<rect width="100%" height="100%" fill="white"/>\n')
        fh.write("\n".join(body))
        fh.write("\n</svg>\n")
