"""Deterministic SVG figures: annotated time-series plots and gridded
field maps.

Output is plain SVG 1.1 text with no timestamps, ids, or randomness, so
identical inputs produce identical bytes. Files live in a
content-addressed store (``<sha256>.svg`` + a manifest of alt text).
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional, Sequence

from .analysis import EmptySeries, FullyMasked
from .core import FigureRef, GridSlice, Series, SummaryStats, ts_format

WIDTH, HEIGHT = 860, 430
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 30, 40, 50

SERIES_COLORS = ["#1f77b4", "#d62728"]

# blue -> cyan -> yellow -> red gradient stops for the field map
_PALETTE = [(0.0, (13, 8, 135)), (0.33, (30, 160, 190)), (0.66, (240, 210, 60)),
            (1.0, (190, 20, 30))]


def _lerp_color(t: float) -> str:
    t = min(1.0, max(0.0, t))
    for (t0, c0), (t1, c1) in zip(_PALETTE, _PALETTE[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            r, g, b = (round(a + f * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"#{r:02x}{g:02x}{b:02x}"
    r, g, b = _PALETTE[-1][1]
    return f"#{r:02x}{g:02x}{b:02x}"


class FigureStore:
    """Append-only content-addressed store of SVG files."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.directory / "manifest.json"

    def put(self, svg: str, alt_text: str, kind: str) -> FigureRef:
        digest = hashlib.sha256(svg.encode("utf-8")).hexdigest()
        path = self.directory / f"{digest}.svg"
        if not path.exists():
            tmp = self.directory / f".{digest}.svg.tmp.{os.getpid()}"
            tmp.write_text(svg, encoding="utf-8")
            tmp.rename(path)  # atomic; safe for concurrent writers
        manifest = {}
        if self._manifest_path.exists():
            manifest = json.loads(self._manifest_path.read_text())
        if digest not in manifest:
            manifest[digest] = {"alt_text": alt_text, "kind": kind}
            self._manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        return FigureRef(path=str(path), alt_text=alt_text, kind=kind)

    def get_bytes(self, digest: str) -> Optional[bytes]:
        path = self.directory / f"{digest}.svg"
        return path.read_bytes() if path.exists() else None


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi == lo:
        return [lo]
    return [lo + i * (hi - lo) / (n - 1) for i in range(n)]


def render_timeseries(
    series_list: Sequence[Series],
    annotations: Sequence[SummaryStats],
    title: str,
    labels: Sequence[str],
    store: FigureStore,
) -> FigureRef:
    """One- or two-series line plot with extrema/mean annotations and a
    per-location legend for comparisons."""
    if not series_list or any(not s.non_missing() for s in series_list):
        raise EmptySeries("cannot plot an empty series")
    unit = series_list[0].unit
    t_min = min(s.timestamps[0] for s in series_list)
    t_max = max(s.timestamps[-1] for s in series_list)
    v_all = [v for s in series_list for _, v in s.non_missing()]
    v_min, v_max = min(v_all), max(v_all)
    if v_min == v_max:
        v_min, v_max = v_min - 0.5, v_max + 0.5
    span_t = (t_max - t_min).total_seconds() or 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def x(ts):
        return MARGIN_L + plot_w * (ts - t_min).total_seconds() / span_t

    def y(v):
        return MARGIN_T + plot_h * (1.0 - (v - v_min) / (v_max - v_min))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{_esc(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>',
    ]
    for tv in _ticks(v_min, v_max):
        yy = y(tv)
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{yy:.2f}" x2="{MARGIN_L + plot_w}" y2="{yy:.2f}" '
            f'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{yy + 4:.2f}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{tv:.2f}</text>'
        )
    for i in range(5):
        ts = t_min + (t_max - t_min) * i / 4
        xx = MARGIN_L + plot_w * i / 4
        parts.append(
            f'<text x="{xx:.2f}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
            f'font-size="10" font-family="sans-serif">{ts.strftime("%Y-%m-%d")}</text>'
        )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.1f}" font-size="12" font-family="sans-serif" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.1f})" '
        f'text-anchor="middle">{_esc(unit)}</text>'
    )

    for idx, s in enumerate(series_list):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        segment: list = []
        segments = []
        for ts, v in zip(s.timestamps, s.values):
            if v is None:
                if len(segment) > 1:
                    segments.append(segment)
                segment = []
            else:
                segment.append(f"{x(ts):.2f},{y(v):.2f}")
        if len(segment) > 1:
            segments.append(segment)
        elif segment:
            px, py = segment[0].split(",")
            parts.append(f'<circle cx="{px}" cy="{py}" r="2.5" fill="{color}"/>')
        for seg in segments:
            parts.append(
                f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" '
                f'stroke-width="1.2"/>'
            )

    for idx, (s, st) in enumerate(zip(series_list, annotations)):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        y_text = MARGIN_T + 14 + 42 * idx
        parts.append(
            f'<circle cx="{x(st.argmax_time):.2f}" cy="{y(st.max):.2f}" r="3.5" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<circle cx="{x(st.argmin_time):.2f}" cy="{y(st.min):.2f}" r="3.5" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        prefix = f"{labels[idx]}: " if len(series_list) > 1 else ""
        parts.append(
            f'<text class="annot-max" x="{MARGIN_L + 8}" y="{y_text}" font-size="11" '
            f'font-family="sans-serif" fill="{color}">{_esc(prefix)}max {st.max:.2f} {_esc(unit)} '
            f"at {ts_format(st.argmax_time)}</text>"
        )
        parts.append(
            f'<text class="annot-min" x="{MARGIN_L + 8}" y="{y_text + 14}" font-size="11" '
            f'font-family="sans-serif" fill="{color}">{_esc(prefix)}min {st.min:.2f} {_esc(unit)} '
            f"at {ts_format(st.argmin_time)}</text>"
        )
        parts.append(
            f'<text class="annot-mean" x="{MARGIN_L + 8}" y="{y_text + 28}" font-size="11" '
            f'font-family="sans-serif" fill="{color}">{_esc(prefix)}mean {st.mean:.2f} '
            f"{_esc(unit)}</text>"
        )

    if len(series_list) > 1:
        for idx, label in enumerate(labels[: len(series_list)]):
            color = SERIES_COLORS[idx % len(SERIES_COLORS)]
            lx = WIDTH - MARGIN_R - 180
            ly = MARGIN_T + 16 + 16 * idx
            parts.append(
                f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text class="legend" x="{lx + 30}" y="{ly}" font-size="11" '
                f'font-family="sans-serif">{_esc(label)}</text>'
            )
    parts.append("</svg>")
    svg = "\n".join(parts)
    alt = title if len(series_list) == 1 else f"{title} ({', '.join(labels)})"
    return store.put(svg, alt, "timeseries")


def render_map(g: GridSlice, title: str, store: FigureStore, colormap: str = "thermal") -> FigureRef:
    """Gridded color map with coordinate axes and a colorbar spanning the
    unmasked data range; masked cells drawn in neutral gray."""
    unmasked = g.unmasked()
    if not unmasked:
        raise FullyMasked("cannot render a fully-masked grid")
    v_min, v_max = min(unmasked), max(unmasked)
    lab_min, lab_max = v_min, v_max
    if v_min == v_max:
        v_min, v_max = v_min - 0.5, v_max + 0.5  # degenerate colorbar widened
    plot_w = WIDTH - MARGIN_L - MARGIN_R - 80  # reserve room for colorbar
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    n_rows, n_cols = len(g.lats), len(g.lons)
    cw, ch = plot_w / n_cols, plot_h / n_rows

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{_esc(title)}</text>',
    ]
    for i, lat in enumerate(g.lats):
        # highest latitude on top
        yy = MARGIN_T + plot_h - (i + 1) * ch
        for j, _lon in enumerate(g.lons):
            v = g.values[i][j]
            fill = "#b8b8b8" if v is None else _lerp_color((v - v_min) / (v_max - v_min))
            parts.append(
                f'<rect x="{MARGIN_L + j * cw:.2f}" y="{yy:.2f}" width="{cw:.2f}" '
                f'height="{ch:.2f}" fill="{fill}"/>'
            )
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w:.1f}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        lat = g.lats[0] + frac * (g.lats[-1] - g.lats[0])
        lon = g.lons[0] + frac * (g.lons[-1] - g.lons[0])
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + plot_h * (1 - frac) + 4:.2f}" '
            f'text-anchor="end" font-size="10" font-family="sans-serif">{lat:.1f}°</text>'
        )
        parts.append(
            f'<text x="{MARGIN_L + plot_w * frac:.2f}" y="{HEIGHT - MARGIN_B + 18}" '
            f'text-anchor="middle" font-size="10" font-family="sans-serif">{lon:.1f}°</text>'
        )

    bar_x = WIDTH - MARGIN_R - 50
    n_steps = 64
    step_h = plot_h / n_steps
    for k in range(n_steps):
        t = 1.0 - (k + 0.5) / n_steps
        parts.append(
            f'<rect x="{bar_x}" y="{MARGIN_T + k * step_h:.2f}" width="18" '
            f'height="{step_h + 0.5:.2f}" fill="{_lerp_color(t)}"/>'
        )
    parts.append(
        f'<rect x="{bar_x}" y="{MARGIN_T}" width="18" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>'
    )
    parts.append(
        f'<text class="cbar-max" x="{bar_x + 24}" y="{MARGIN_T + 10}" font-size="11" '
        f'font-family="sans-serif">{lab_max:.2f}</text>'
    )
    parts.append(
        f'<text class="cbar-min" x="{bar_x + 24}" y="{MARGIN_T + plot_h:.1f}" font-size="11" '
        f'font-family="sans-serif">{lab_min:.2f}</text>'
    )
    parts.append(
        f'<text class="cbar-unit" x="{bar_x}" y="{MARGIN_T - 8}" font-size="11" '
        f'font-family="sans-serif">{_esc(g.unit)}</text>'
    )
    parts.append("</svg>")
    svg = "\n".join(parts)
    alt = f"{title} ({lab_min:.2f} to {lab_max:.2f} {g.unit})"
    return store.put(svg, alt, "map")
