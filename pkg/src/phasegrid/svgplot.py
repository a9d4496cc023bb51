"""Minimal SVG emitters for scatter plots and heatmaps.

Hand-rolled so outputs are dependency-free and diffable: fixed geometry,
fixed color maps, floats formatted with repr-stable precision.

Color maps:
  diverging  — blue (negative) -> white (zero) -> red (positive)
  sequential — white (low) -> dark blue (high)
  matrix     — navy (-1) -> white (0) -> beige/orange (+1)
Missing cells are drawn in light gray with a cross.
"""

from __future__ import annotations

import math

import numpy as np


def _lerp(a, b, t):
    return tuple(round(x + (y - x) * t) for x, y in zip(a, b))


def _rgb(c):
    return f"rgb({c[0]},{c[1]},{c[2]})"


_WHITE = (255, 255, 255)
_RED = (178, 24, 43)
_BLUE = (33, 102, 172)
_NAVY = (5, 48, 97)
_BEIGE = (222, 160, 77)
_DARKBLUE = (8, 48, 107)


def diverging_color(v, vmax):
    """Symmetric around 0: blue for v<0, red for v>0."""
    if vmax <= 0:
        vmax = 1.0
    t = max(-1.0, min(1.0, v / vmax))
    return _rgb(_lerp(_WHITE, _RED, t) if t >= 0 else _lerp(_WHITE, _BLUE, -t))


def sequential_color(v, vmin, vmax):
    span = vmax - vmin
    t = 0.0 if span <= 0 else max(0.0, min(1.0, (v - vmin) / span))
    return _rgb(_lerp(_WHITE, _DARKBLUE, t))


def matrix_color(v):
    t = max(-1.0, min(1.0, v))
    return _rgb(_lerp(_WHITE, _BEIGE, t) if t >= 0 else _lerp(_WHITE, _NAVY, -t))


def _svg_header(width, height, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{title}</title>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif">{title}</text>',
    ]


def scatter_svg(path, init_points, final_points, title="W1 rows", size=420):
    """Initial (red) vs final (green) 2-d scatter."""
    init_points = np.atleast_2d(init_points)[:, :2]
    final_points = np.atleast_2d(final_points)[:, :2]
    allpts = np.vstack([init_points, final_points])
    lim = float(np.max(np.abs(allpts))) or 1.0
    lim *= 1.05
    margin, plot = 40, size - 80

    def sx(x):
        return margin + (x + lim) / (2 * lim) * plot

    def sy(y):
        return size - margin - (y + lim) / (2 * lim) * plot

    parts = _svg_header(size, size, title)
    parts.append(f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
                 f'fill="none" stroke="black"/>')
    parts.append(f'<line x1="{sx(-lim)}" y1="{sy(0)}" x2="{sx(lim)}" y2="{sy(0)}" '
                 f'stroke="#cccccc"/>')
    parts.append(f'<line x1="{sx(0)}" y1="{sy(-lim)}" x2="{sx(0)}" y2="{sy(lim)}" '
                 f'stroke="#cccccc"/>')
    for pts, color, r in ((init_points, "red", 2.0), (final_points, "green", 2.0)):
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="{r}" '
                         f'fill="{color}" fill-opacity="0.55"/>')
    parts.append(f'<text x="{margin}" y="{size - 8}" font-size="11" '
                 f'font-family="sans-serif">red = initial, green = final, '
                 f'range ±{lim:.3g}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def heatmap_svg(path, x_values, y_values, grid, title, diverging=True,
                stars=None, cell=46):
    """Grid heatmap; grid[i][j] is the value at (y_values[i], x_values[j]).

    NaN cells are rendered gray with a cross. `stars` is an optional list
    of (x, y) data coordinates drawn as black stars.
    """
    grid = np.asarray(grid, dtype=np.float64)
    ny, nx = grid.shape
    assert ny == len(y_values) and nx == len(x_values)
    left, top, bottom = 60, 30, 40
    width = left + nx * cell + 20
    height = top + ny * cell + bottom
    finite = grid[np.isfinite(grid)]
    vmax = float(np.max(np.abs(finite))) if finite.size else 1.0
    vmin = float(np.min(finite)) if finite.size else 0.0
    vtop = float(np.max(finite)) if finite.size else 1.0

    parts = _svg_header(width, height, title)
    # y axis runs bottom-up so larger y sits higher, as on a phase diagram
    for i, yv in enumerate(y_values):
        for j, xv in enumerate(x_values):
            v = grid[i, j]
            x0 = left + j * cell
            y0 = top + (ny - 1 - i) * cell
            if math.isnan(v):
                parts.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                             f'fill="#dddddd" stroke="#999999"/>')
                parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + cell}" y2="{y0 + cell}" '
                             f'stroke="#999999"/>')
            else:
                color = diverging_color(v, vmax) if diverging else sequential_color(v, vmin, vtop)
                parts.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                             f'fill="{color}" stroke="#888888"/>')
                parts.append(f'<text x="{x0 + cell / 2}" y="{y0 + cell / 2 + 4}" '
                             f'text-anchor="middle" font-size="9" '
                             f'font-family="sans-serif">{v:.2f}</text>')
    for j, xv in enumerate(x_values):
        parts.append(f'<text x="{left + j * cell + cell / 2}" y="{height - bottom + 14}" '
                     f'text-anchor="middle" font-size="10" font-family="sans-serif">{xv:g}</text>')
    for i, yv in enumerate(y_values):
        parts.append(f'<text x="{left - 6}" y="{top + (ny - 1 - i) * cell + cell / 2 + 4}" '
                     f'text-anchor="end" font-size="10" font-family="sans-serif">{yv:g}</text>')
    if stars:
        xs = list(x_values)
        ys = list(y_values)

        def datax(x):
            if len(xs) == 1:
                return left + cell / 2
            return np.interp(x, xs, [left + (k + 0.5) * cell for k in range(nx)])

        def datay(y):
            if len(ys) == 1:
                return top + cell / 2
            return np.interp(y, ys, [top + (ny - 1 - k + 0.5) * cell for k in range(ny)])

        for x, y in stars:
            parts.append(f'<text x="{datax(x):.1f}" y="{datay(y):.1f}" text-anchor="middle" '
                         f'font-size="14" font-family="sans-serif">&#9733;</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def matrix_svg(path, matrix, title="cosine similarity", max_blocks=200, size=460):
    """Cosine-similarity matrix as a block-averaged heatmap in [-1, 1]."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    k = matrix.shape[0]
    if k > max_blocks:
        # average into max_blocks x max_blocks tiles
        edges = np.linspace(0, k, max_blocks + 1).astype(int)
        blocks = np.empty((max_blocks, max_blocks))
        for i in range(max_blocks):
            for j in range(max_blocks):
                blocks[i, j] = matrix[edges[i]:edges[i + 1], edges[j]:edges[j + 1]].mean()
        matrix = blocks
        k = max_blocks
    margin, plot = 30, size - 60
    cell = plot / k
    parts = _svg_header(size, size, title)
    for i in range(k):
        for j in range(k):
            x0 = margin + j * cell
            y0 = margin + i * cell
            parts.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{cell:.2f}" '
                         f'height="{cell:.2f}" fill="{matrix_color(matrix[i, j])}"/>')
    parts.append(f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
                 f'fill="none" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
