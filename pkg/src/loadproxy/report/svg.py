"""Minimal SVG 1.1 heatmap and line-chart writers.

Output is plain text built from fixed-precision numbers, so identical
inputs always give identical bytes.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from xml.sax.saxutils import escape

# value 0 -> lightest, value 1 -> darkest, linear per channel
RAMP_LIGHT = (247, 251, 255)
RAMP_DARK = (8, 48, 107)

SERIES_COLORS = ("#1f4e99", "#c0504d", "#4f9a5b", "#8064a2", "#d08a2e", "#555555")

FONT = "sans-serif"
FONT_SIZE = 11


def ramp_color(value: float) -> str:
    v = min(1.0, max(0.0, float(value)))
    rgb = [round(lo + (hi - lo) * v) for lo, hi in zip(RAMP_LIGHT, RAMP_DARK)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _num(x: float) -> str:
    text = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _header(width, height, comment):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- {comment} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_num(width)}" height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}" '
        f'font-family="{FONT}" font-size="{FONT_SIZE}">',
    ]


def heatmap_svg(
    row_labels: Sequence[str],
    column_labels: Sequence[str],
    values: Sequence[Sequence[float]],
    title: str = "",
    cell: float = 22.0,
) -> str:
    """One rect per cell; column labels run along the bottom edge."""
    n_rows, n_cols = len(row_labels), len(column_labels)
    if len(values) != n_rows or any(len(r) != n_cols for r in values):
        raise ValueError("values must be a rows x columns grid")
    left = 12 + 7 * max((len(s) for s in row_labels), default=0)
    top = 30.0 if title else 10.0
    label_band = 8 + 7 * max((len(s) for s in column_labels), default=0)
    width = left + n_cols * cell + 10
    height = top + n_rows * cell + label_band + 10

    comment = (
        "fill = linear ramp from rgb{} at value 0 to rgb{} at value 1; "
        "values outside [0, 1] are clamped".format(RAMP_LIGHT, RAMP_DARK)
    )
    out = _header(width, height, comment)
    if title:
        out.append(f'<text x="{_num(width / 2)}" y="18" text-anchor="middle">{escape(title)}</text>')
    for r, label in enumerate(row_labels):
        y = top + r * cell
        out.append(
            f'<text x="{_num(left - 6)}" y="{_num(y + cell * 0.65)}" text-anchor="end">{escape(label)}</text>'
        )
        for c in range(n_cols):
            v = float(values[r][c])
            out.append(
                f'<rect x="{_num(left + c * cell)}" y="{_num(y)}" width="{_num(cell)}" '
                f'height="{_num(cell)}" fill="{ramp_color(v)}" stroke="#ffffff">'
                f"<title>{escape(label)} {escape(column_labels[c])}: {v:.3f}</title></rect>"
            )
    base = top + n_rows * cell + 6
    for c, label in enumerate(column_labels):
        x = left + c * cell + cell / 2
        out.append(
            f'<text x="{_num(x)}" y="{_num(base)}" text-anchor="end" '
            f'transform="rotate(-90 {_num(x)} {_num(base)})" dy="0.35em">{escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart_svg(
    x: Sequence[float],
    series: Mapping[str, Sequence[float]],
    title: str = "",
    x_label: str = "",
    width: float = 640.0,
    height: float = 360.0,
    y_range: tuple[float, float] = (0.0, 1.0),
) -> str:
    left, right, top, bottom = 50.0, 150.0, 30.0, 45.0
    plot_w, plot_h = width - left - right, height - top - bottom
    x_lo, x_hi = (min(x), max(x)) if len(x) else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo, y_hi = y_range

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v):
        v = min(y_hi, max(y_lo, v))
        return top + (1 - (v - y_lo) / (y_hi - y_lo)) * plot_h

    out = _header(width, height, "line chart; y axis spans {} to {}".format(_num(y_lo), _num(y_hi)))
    if title:
        out.append(f'<text x="{_num(left + plot_w / 2)}" y="18" text-anchor="middle">{escape(title)}</text>')
    out.append(
        f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(plot_w)}" height="{_num(plot_h)}" '
        'fill="none" stroke="#999999"/>'
    )
    for k in range(5):
        v = y_lo + (y_hi - y_lo) * k / 4
        out.append(
            f'<text x="{_num(left - 6)}" y="{_num(py(v) + 4)}" text-anchor="end">{_num(v)}</text>'
        )
    for v in x:
        out.append(
            f'<text x="{_num(px(v))}" y="{_num(top + plot_h + 16)}" text-anchor="middle">{_num(v)}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{_num(left + plot_w / 2)}" y="{_num(height - 8)}" text-anchor="middle">{escape(x_label)}</text>'
        )
    for k, (name, ys) in enumerate(series.items()):
        color = SERIES_COLORS[k % len(SERIES_COLORS)]
        points = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x, ys))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}">'
            f"<title>{escape(name)}</title></polyline>"
        )
        ly = top + 14 + 18 * k
        out.append(
            f'<line x1="{_num(left + plot_w + 10)}" y1="{_num(ly - 4)}" x2="{_num(left + plot_w + 30)}" '
            f'y2="{_num(ly - 4)}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{_num(left + plot_w + 36)}" y="{_num(ly)}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

