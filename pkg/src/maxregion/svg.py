"""Minimal SVG heat maps for values on a rectangular grid.

The palette interpolates linearly in RGB between the anchors of ``PALETTE``
(dark blue at the low end, pale yellow in the middle, dark red at the top).
NaN cells are drawn in ``MISSING_COLOR``.
"""
from xml.sax.saxutils import escape

import numpy as np

from .errors import UnsupportedLayoutError

PALETTE = ((0.0, (33, 102, 172)), (0.5, (255, 255, 191)), (1.0, (178, 24, 43)))
MISSING_COLOR = "#bdbdbd"
CELL = 16
LEGEND_W = 90


def color_for(t, palette=PALETTE):
    """Hex colour at position t in [0, 1] of the palette."""
    t = min(max(float(t), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(palette[:-1], palette[1:]):
        if t <= t1:
            w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = [round(a + w * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % palette[-1][1]


def grid_layout(coords, tol=1e-9):
    """Column and row index of each location on a full rectangular lattice."""
    coords = np.asarray(coords, float)
    if coords.ndim != 2 or coords.shape[1] != 2 or len(coords) == 0:
        raise UnsupportedLayoutError("coordinates must be an (n, 2) array")
    xs = np.unique(np.round(coords[:, 0] / tol) * tol)
    ys = np.unique(np.round(coords[:, 1] / tol) * tol)
    if len(xs) * len(ys) != len(coords):
        raise UnsupportedLayoutError("locations do not fill a rectangular grid")
    col = np.searchsorted(xs, np.round(coords[:, 0] / tol) * tol)
    row = np.searchsorted(ys, np.round(coords[:, 1] / tol) * tol)
    if len(set(zip(col.tolist(), row.tolist()))) != len(coords):
        raise UnsupportedLayoutError("duplicate grid cells")
    return col, row, len(xs), len(ys)


def _label(v):
    return f"{v:.4g}"


def render_heatmap_svg(coords, values, title="", vmin=None, vmax=None,
                       boundaries=None, palette=PALETTE):
    """SVG text with one rectangle per grid cell and a colour legend.

    ``boundaries`` may hold per-location cluster labels; edges between cells
    with different labels are then drawn as black lines.
    """
    values = np.asarray(values, float)
    col, row, nx, ny = grid_layout(coords)
    if len(values) != len(col):
        raise ValueError("one value per location required")
    finite = values[np.isfinite(values)]
    lo = vmin if vmin is not None else (finite.min() if finite.size else 0.0)
    hi = vmax if vmax is not None else (finite.max() if finite.size else 1.0)
    span = hi - lo
    top = 24 if title else 4
    width = nx * CELL + LEGEND_W + 8
    height = max(ny * CELL, 140) + top + 4
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if title:
        out.append(f'<text x="4" y="16" font-family="sans-serif" font-size="12">'
                   f'{escape(title)}</text>')
    out.append(f'<g id="cells" transform="translate(4,{top})" shape-rendering="crispEdges">')
    for k in range(len(values)):
        v = values[k]
        if np.isfinite(v):
            fill = color_for(0.5 if span == 0 else (v - lo) / span, palette)
        else:
            fill = MISSING_COLOR
        x = col[k] * CELL
        y = (ny - 1 - row[k]) * CELL  # north up
        out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>')
    out.append("</g>")
    if boundaries is not None:
        out.append(_boundary_paths(np.asarray(boundaries), col, row, nx, ny, top))
    out.append(_legend(lo, hi, nx * CELL + 12, top, palette))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _boundary_paths(labels, col, row, nx, ny, top):
    grid = np.full((nx, ny), -1)
    grid[col, row] = labels
    segs = []
    for i in range(nx):
        for j in range(ny):
            y = (ny - 1 - j) * CELL
            if i + 1 < nx and grid[i, j] != grid[i + 1, j]:
                x = (i + 1) * CELL
                segs.append(f"M{x} {y}v{CELL}")
            if j + 1 < ny and grid[i, j] != grid[i, j + 1]:
                segs.append(f"M{i * CELL} {y}h{CELL}")
    return (f'<path id="boundaries" transform="translate(4,{top})" fill="none" '
            f'stroke="black" stroke-width="1.5" d="{"".join(segs)}"/>')


def _legend(lo, hi, x0, top, palette):
    h = 120
    parts = [f'<g id="legend" transform="translate({x0},{top})">',
             '<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0">']
    for t, _ in palette:
        parts.append(f'<stop offset="{t}" stop-color="{color_for(t, palette)}"/>')
    parts.append("</linearGradient></defs>")
    if hi == lo:
        parts.append(f'<rect x="0" y="0" width="14" height="14" '
                     f'fill="{color_for(0.5, palette)}"/>')
        parts.append(f'<text x="20" y="11" font-family="sans-serif" font-size="10">'
                     f'{_label(lo)}</text>')
    else:
        parts.append(f'<rect x="0" y="0" width="14" height="{h}" fill="url(#ramp)"/>')
        parts.append(f'<text x="20" y="9" font-family="sans-serif" font-size="10">'
                     f'{_label(hi)}</text>')
        parts.append(f'<text x="20" y="{h}" font-family="sans-serif" font-size="10">'
                     f'{_label(lo)}</text>')
    parts.append("</g>")
    return "\n".join(parts)
