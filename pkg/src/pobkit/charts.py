"""Tiny deterministic SVG emitters for bar and line charts.

CSV is the canonical output everywhere; these exist so a run can drop a
glanceable picture next to the numbers without pulling in a plotting
stack.  Output is a pure function of the inputs: fixed canvas, fixed
formatting, no timestamps.
"""

from __future__ import annotations

from pobkit.util import atomic_write_text

WIDTH = 640
HEIGHT = 320
MARGIN_LEFT = 56
MARGIN_RIGHT = 16
MARGIN_TOP = 34
MARGIN_BOTTOM = 44

PALET = ("#4878cf", "#d65f5f", "#6acc65", "#956cb4")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _header(title: str) -> list[str]:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        lines.append(
            f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    return lines


def _axes(y_max: float) -> list[str]:
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
    lines = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 - frac * (y0 - y1)
        lines.append(
            f'<text x="{x0 - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{_fmt(frac * y_max)}</text>'
        )
        if frac > 0:
            lines.append(
                f'<line x1="{x0}" y1="{_fmt(y)}" x2="{x1}" y2="{_fmt(y)}" '
                f'stroke="#dddddd"/>'
            )
    return lines


def bar_chart(values, labels, title: str = "") -> str:
    """One bar per value, labeled beneath; y axis starts at zero."""
    values = [float(v) for v in values]
    if len(values) != len(labels) or not values:
        raise ValueError("values and labels must be equal-length and non-empty")
    if min(values) < 0:
        raise ValueError("bar chart expects nonnegative values")
    y_max = max(values) or 1.0
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    span_x = WIDTH - MARGIN_RIGHT - x0
    span_y = y0 - MARGIN_TOP
    lines = _header(title) + _axes(y_max)
    slot = span_x / len(values)
    bar_w = slot * 0.7
    for i, (v, lab) in enumerate(zip(values, labels)):
        h = v / y_max * span_y
        x = x0 + i * slot + (slot - bar_w) / 2
        lines.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y0 - h)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(h)}" fill="{PALET[0]}"/>'
        )
        lines.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{y0 + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{lab}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def line_chart(series, title: str = "", y_max: float | None = None) -> str:
    """series: list of (name, [(x, y), ...]); shared axes, legend top right."""
    if not series:
        raise ValueError("no series to plot")
    all_pts = [pt for _, pts in series for pt in pts]
    if not all_pts:
        raise ValueError("series contain no points")
    xs = [p[0] for p in all_pts]
    ys = [p[1] for p in all_pts]
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max is None:
        y_max = max(ys) or 1.0
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    span_x = WIDTH - MARGIN_RIGHT - x0
    span_y = y0 - MARGIN_TOP
    lines = _header(title) + _axes(y_max)

    def sx(x):
        return x0 + (x - x_min) / (x_max - x_min) * span_x

    def sy(y):
        return y0 - y / y_max * span_y

    for idx, (name, pts) in enumerate(series):
        color = PALET[idx % len(PALET)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in sorted(pts))
        lines.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        ly = MARGIN_TOP + 14 * idx
        lines.append(
            f'<line x1="{WIDTH - 150}" y1="{ly}" x2="{WIDTH - 130}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        lines.append(
            f'<text x="{WIDTH - 124}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(path, svg: str) -> None:
    atomic_write_text(path, svg)
