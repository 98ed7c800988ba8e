"""Minimal deterministic SVG line plots (no plotting backend needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=160, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _series_key(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def emit_plot(
    rows: Sequence[Mapping],
    x: str,
    y: str,
    path,
    series: str | None = None,
    title: str = "",
    note: str = "",
) -> Path:
    """Write an SVG line plot of ``y`` against ``x``, one polyline per ``series`` value.

    Same input gives the same bytes. ``note`` is stored in the SVG <desc>.
    """
    if not rows:
        raise ValueError("cannot plot an empty table")
    raw: dict = {}
    for row in rows:
        key = None if series is None else row[series]
        raw.setdefault(key, []).append((float(row[x]), float(row[y])))
    # series order must not depend on row order
    keys = sorted(raw, key=_series_key)
    groups = {("" if k is None else f"{series}={k}"): sorted(raw[k]) for k in keys}

    xs = [p[0] for pts in groups.values() for p in pts]
    ys = [p[1] for pts in groups.values() for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        pad = abs(y0) * 0.05 or 1.0
        y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
        f"<desc>{escape(note)}</desc>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_fmt(sx(t))}" y="{HEIGHT - MARGIN["bottom"] + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">{escape(y)}</text>'
    )
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for i, (name, pts) in enumerate(groups.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in pts)
        out.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for a, b in pts:
            out.append(f'<circle class="marker" cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}" r="3" fill="{color}"/>')
        if name:
            ly = MARGIN["top"] + 14 + 18 * i
            lx = WIDTH - MARGIN["right"] + 12
            out.append(f'<line class="legend" x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 24}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
