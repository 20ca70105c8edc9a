"""Minimal standalone SVG line charts.

No plotting dependency: output is deterministic, diffable SVG with the
numeric data embedded both as drawn markers and as a CSV block inside a
<desc> element.  Good enough for benchmark curves (one series per label,
optional symmetric error bars).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 40, 56


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]
    yerr: list[float] | None = None


@dataclass
class LineChart:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    y_log: bool = False

    def add(self, label, x, y, yerr=None):
        self.series.append(Series(label, list(x), list(y), list(yerr) if yerr is not None else None))

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path

    def render(self) -> str:
        pts = [(x, y) for s in self.series for x, y in zip(s.x, s.y) if math.isfinite(y)]
        if not pts:
            pts = [(0.0, 0.0), (1.0, 1.0)]
        errs = [
            e
            for s in self.series
            if s.yerr
            for y, e in zip(s.y, s.yerr)
            if math.isfinite(y) and math.isfinite(e)
        ]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        if errs:
            emax = max(errs)
            ys = ys + [min(ys) - emax, max(ys) + emax]
        x0, x1 = _pad_range(min(xs), max(xs))
        if self.y_log:
            ys = [y for y in ys if y > 0] or [1e-3, 1.0]
            y0, y1 = math.log10(min(ys)), math.log10(max(ys))
            y0, y1 = _pad_range(y0, y1)
        else:
            y0, y1 = _pad_range(min(ys), max(ys))

        def sx(x):
            return MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R)

        def sy(y):
            v = math.log10(y) if self.y_log else y
            return HEIGHT - MARGIN_B - (v - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f"<desc>{self._data_csv()}</desc>",
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:g}" y="20" text-anchor="middle" font-size="14">{_esc(self.title)}</text>',
        ]
        # axes
        out.append(
            f'<path d="M {MARGIN_L} {MARGIN_T} V {HEIGHT - MARGIN_B} H {WIDTH - MARGIN_R}" '
            'fill="none" stroke="black"/>'
        )
        for t in _ticks(x0, x1):
            px = sx(t)
            out.append(f'<line x1="{px:.2f}" y1="{HEIGHT - MARGIN_B}" x2="{px:.2f}" y2="{HEIGHT - MARGIN_B + 5}" stroke="black"/>')
            out.append(
                f'<text x="{px:.2f}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle">{t:g}</text>'
            )
        for t in _ticks(y0, y1):
            label = 10**t if self.y_log else t
            py = HEIGHT - MARGIN_B - (t - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B)
            out.append(f'<line x1="{MARGIN_L - 5}" y1="{py:.2f}" x2="{MARGIN_L}" y2="{py:.2f}" stroke="black"/>')
            out.append(
                f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" text-anchor="end">{label:.3g}</text>'
            )
        out.append(
            f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:g}" y="{HEIGHT - 12}" '
            f'text-anchor="middle">{_esc(self.xlabel)}</text>'
        )
        out.append(
            f'<text x="16" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2:g}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(MARGIN_T + HEIGHT - MARGIN_B) / 2:g})">{_esc(self.ylabel)}</text>'
        )
        # series
        for i, s in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            coords = [
                (sx(x), sy(y)) for x, y in zip(s.x, s.y) if math.isfinite(y) and (not self.y_log or y > 0)
            ]
            if len(coords) > 1:
                d = "M " + " L ".join(f"{px:.2f} {py:.2f}" for px, py in coords)
                out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if s.yerr:
                for x, y, e in zip(s.x, s.y, s.yerr):
                    if not (math.isfinite(y) and math.isfinite(e)):
                        continue
                    lo, hi = y - e, y + e
                    if self.y_log:
                        lo = max(lo, 10**y0)
                    px = sx(x)
                    out.append(
                        f'<line x1="{px:.2f}" y1="{sy(lo):.2f}" x2="{px:.2f}" y2="{sy(hi):.2f}" '
                        f'stroke="{color}" stroke-width="1"/>'
                    )
            for px, py in coords:
                out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color}"/>')
            ly = MARGIN_T + 14 + 16 * i
            lx = WIDTH - MARGIN_R - 150
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
            out.append(f'<text x="{lx + 26}" y="{ly}">{_esc(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _data_csv(self) -> str:
        lines = ["series,x,y,yerr"]
        for s in self.series:
            yerr = s.yerr or [float("nan")] * len(s.x)
            for x, y, e in zip(s.x, s.y, yerr):
                lines.append(f"{_esc(s.label)},{x:.12g},{y:.12g},{e:.12g}")
        return "&#10;".join(lines)


def _pad_range(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        pad = abs(lo) * 0.1 + 1e-6
        return lo - pad, lo + pad
    pad = (hi - lo) * 0.06
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _esc(text) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
