"""Static SVG charts drawn from already persisted CSV tables.

Every number that appears as text in a chart is passed in by the caller,
who reads it from a CSV; the charts compute nothing but geometry.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")


def _svg(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>'] + body + ["</svg>", ""])


def _text(x, y, s, anchor="start", size=11, weight="normal") -> str:
    return (f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}" '
            f'font-weight="{weight}">{escape(str(s))}</text>')


def hbar_panels(panels, value_format="{:.4g}", panel_width=300, bar_height=14) -> str:
    """Horizontal bar panels side by side.

    panels: list of (title, [(label, value, value_text)]) with values >= 0.
    """
    gap, label_w = 30, 40
    rows = max(len(p[1]) for p in panels) if panels else 0
    height = 50 + rows * (bar_height + 4)
    width = len(panels) * (panel_width + label_w + gap) + gap
    body = []
    for k, (title, bars) in enumerate(panels):
        x0 = gap + k * (panel_width + label_w + gap) + label_w
        body.append(_text(x0, 20, title, weight="bold"))
        vmax = max((v for _, v, _ in bars), default=0.0) or 1.0
        for i, (label, value, text) in enumerate(bars):
            y = 35 + i * (bar_height + 4)
            w = (panel_width - 60) * value / vmax
            body.append(_text(x0 - 4, y + bar_height - 3, label, anchor="end"))
            body.append(f'<rect x="{x0:.1f}" y="{y:.1f}" width="{w:.2f}" height="{bar_height}" '
                        f'fill="{PALETTE[k % len(PALETTE)]}"><title>{escape(label)}: {escape(text)}</title></rect>')
            body.append(_text(x0 + w + 3, y + bar_height - 3, text))
    return _svg(width, height, body)


def grouped_bars(groups, series, values, texts, title="") -> str:
    """Vertical grouped bars in [0, 1]: values[g][s] for group g, series s."""
    n_g, n_s = len(groups), len(series)
    bw, inner, outer = 12, 2, 18
    plot_h, top, left = 220, 40, 40
    width = left + n_g * (n_s * (bw + inner) + outer) + 220
    height = top + plot_h + 40
    body = [_text(left, 20, title, weight="bold")]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1 - tick)
        body.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - 220}" y2="{y:.1f}" stroke="#ddd"/>')
        body.append(_text(left - 4, y + 4, f"{tick:g}", anchor="end"))
    for g, name in enumerate(groups):
        gx = left + outer / 2 + g * (n_s * (bw + inner) + outer)
        for s in range(n_s):
            v = values[g][s]
            h = plot_h * max(0.0, min(1.0, v))
            x = gx + s * (bw + inner)
            body.append(f'<rect x="{x:.1f}" y="{top + plot_h - h:.1f}" width="{bw}" height="{h:.2f}" '
                        f'fill="{PALETTE[s % len(PALETTE)]}"><title>{escape(name)} {escape(series[s])}: '
                        f'{escape(texts[g][s])}</title></rect>')
        body.append(_text(gx + n_s * (bw + inner) / 2, top + plot_h + 16, name, anchor="middle"))
    lx = width - 210
    for s, name in enumerate(series):
        y = top + s * 18
        body.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="{PALETTE[s % len(PALETTE)]}"/>')
        body.append(_text(lx + 18, y + 10, name))
    return _svg(width, height, body)


def pie_and_cumulative(slices, curves, title="") -> str:
    """Two-slice pie of class shares and cumulative gap curves per source.

    slices: [(label, count, text)]; curves: {source: sorted gap array}.
    """
    body = [_text(20, 20, title, weight="bold")]
    cx, cy, r = 130, 150, 90
    total = sum(c for _, c, _ in slices) or 1
    start = -math.pi / 2
    for k, (label, count, text) in enumerate(slices):
        frac = count / total
        end = start + 2 * math.pi * frac
        color = PALETTE[k % len(PALETTE)]
        if frac >= 1.0:
            body.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{color}"><title>{escape(text)}</title></circle>')
        elif frac > 0:
            x1, y1 = cx + r * math.cos(start), cy + r * math.sin(start)
            x2, y2 = cx + r * math.cos(end), cy + r * math.sin(end)
            large = 1 if frac > 0.5 else 0
            body.append(f'<path d="M{cx},{cy} L{x1:.2f},{y1:.2f} A{r},{r} 0 {large} 1 {x2:.2f},{y2:.2f} Z" '
                        f'fill="{color}"><title>{escape(label)}: {escape(text)}</title></path>')
        body.append(f'<rect x="30" y="{260 + 16 * k}" width="10" height="10" fill="{color}"/>')
        body.append(_text(46, 269 + 16 * k, f"{label}: {text}"))
        start = end

    x0, y0, w, h = 300, 40, 320, 220
    gmax = max((float(np.max(g)) for g in curves.values() if len(g)), default=1.0) or 1.0
    body.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#999"/>')
    body.append(_text(x0 + w / 2, y0 + h + 28, "gap to optimal (%)", anchor="middle"))
    body.append(_text(x0 - 6, y0 + 4, "1", anchor="end"))
    body.append(_text(x0 - 6, y0 + h, "0", anchor="end"))
    for k, (source, gaps) in enumerate(curves.items()):
        gaps = np.sort(np.asarray(gaps, dtype=float))
        if gaps.size == 0:
            continue
        frac = np.arange(1, gaps.size + 1) / gaps.size
        pts = " ".join(f"{x0 + w * g / gmax:.2f},{y0 + h * (1 - f):.2f}" for g, f in zip(gaps, frac))
        color = PALETTE[(k + 2) % len(PALETTE)]
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<rect x="{x0 + w + 12}" y="{y0 + 16 * k}" width="10" height="10" fill="{color}"/>')
        body.append(_text(x0 + w + 28, y0 + 9 + 16 * k, source))
    return _svg(x0 + w + 140, 330, body)


def strip_plot(features, phis, quantiles, title="", seed=0) -> str:
    """Per-feature horizontal strips of attributions, jittered vertically.

    phis, quantiles: (rows, features) arrays; colour runs blue (low feature
    value quantile) to red (high).
    """
    rng = np.random.default_rng(seed)
    phis = np.asarray(phis, dtype=float)
    lim = float(np.max(np.abs(phis))) if phis.size else 1.0
    lim = lim or 1.0
    left, w, row_h, top = 60, 420, 26, 40
    body = [_text(left, 20, title, weight="bold")]
    zx = left + w / 2
    height = top + row_h * len(features) + 30
    body.append(f'<line x1="{zx}" y1="{top - 6}" x2="{zx}" y2="{height - 30}" stroke="#999"/>')
    for i, key in enumerate(features):
        yc = top + row_h * i + row_h / 2
        body.append(_text(left - 6, yc + 4, key, anchor="end"))
        jitter = rng.uniform(-row_h * 0.35, row_h * 0.35, size=phis.shape[0])
        for r in range(phis.shape[0]):
            q = float(quantiles[r, i])
            color = f"rgb({int(255 * q)},{int(60 + 40 * (1 - abs(2 * q - 1)))},{int(255 * (1 - q))})"
            x = zx + (w / 2) * phis[r, i] / lim
            body.append(f'<circle cx="{x:.2f}" cy="{yc + jitter[r]:.2f}" r="2.2" fill="{color}" fill-opacity="0.8"/>')
    body.append(_text(zx, height - 10, "attribution (score scale)", anchor="middle"))
    return _svg(left + w + 40, height, body)
