"""Minimal SVG 1.1 output: line panels, histograms and 2D weight maps.

Coordinates are written with a fixed number of decimals so the same data
always produce the same bytes.
"""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dynamics import center_pull
from .geometry import Polyhedron
from .weights import WeightParams, weight

WIDTH = 480
HEIGHT = 320
MARGIN = 48
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Axes:
    """Maps data coordinates to the plotting area of one panel."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT, margin=MARGIN):
        self.x0, self.x1 = map(float, xlim)
        self.y0, self.y1 = map(float, ylim)
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.w, self.h, self.m = width, height, margin

    def px(self, x):
        return self.m + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (self.w - 2 * self.m)

    def py(self, y):
        return self.h - self.m - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (self.h - 2 * self.m)

    def frame(self, title, xlabel, ylabel) -> list:
        m, w, h = self.m, self.w, self.h
        out = [
            f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" fill="none" stroke="#000"/>',
            f'<text x="{w / 2:.0f}" y="{m / 2:.0f}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{w / 2:.0f}" y="{h - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="12" y="{h / 2:.0f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 12 {h / 2:.0f})">{escape(ylabel)}</text>',
        ]
        for x in np.linspace(self.x0, self.x1, 5):
            out.append(f'<text x="{_f(self.px(x))}" y="{h - m + 14}" text-anchor="middle" '
                       f'font-size="10">{x:.3g}</text>')
        for y in np.linspace(self.y0, self.y1, 5):
            out.append(f'<text x="{m - 4}" y="{_f(self.py(y) + 3)}" text-anchor="end" '
                       f'font-size="10">{y:.3g}</text>')
        return out

    def polyline(self, x, y, color, width=1.0, extra="") -> str:
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(self.px(x), self.py(y)))
        return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{width}"{extra}/>')


def _document(body: Sequence[str], width=WIDTH, height=HEIGHT) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n')
    return head + "\n".join(body) + "\n</svg>\n"


def _thin(x, y, max_points=1500):
    """Keep at most ``max_points`` evenly spaced vertices (always the last one)."""
    if len(x) <= max_points:
        return x, y
    idx = np.unique(np.r_[np.linspace(0, len(x) - 1, max_points).astype(int), len(x) - 1])
    return x[idx], y[idx]


def trajectory_panel(series, title: str, bounds=None, xlabel="t", ylabel="z",
                     ylim=None) -> str:
    """One line per ``(times, values)`` pair, with dashed lines at ``bounds``."""
    series = [(np.asarray(t, dtype=float), np.asarray(z, dtype=float)) for t, z in series]
    xs = np.concatenate([t for t, _ in series])
    ys = np.concatenate([z for _, z in series])
    finite = ys[np.isfinite(ys)]
    if ylim is None:
        lo = min(finite.min(), *(bounds or [finite.min()]))
        hi = max(finite.max(), *(bounds or [finite.max()]))
        pad = 0.05 * (hi - lo or 1.0)
        ylim = (lo - pad, hi + pad)
    ax = _Axes((xs.min(), xs.max()), ylim)
    body = ax.frame(title, xlabel, ylabel)
    for b in bounds or []:
        body.append(ax.polyline([ax.x0, ax.x1], [b, b], "#000", 1.0, ' stroke-dasharray="4 3"'))
    for i, (t, z) in enumerate(series):
        t, z = _thin(t, np.clip(z, *ylim))
        body.append(ax.polyline(t, z, PALETTE[i % len(PALETTE)]))
    return _document(body)


def histogram_panel(samples, grid, density, bins: int, support, title: str) -> str:
    """Normalized histogram of ``samples`` with the target ``density`` overlaid."""
    counts, edges = np.histogram(samples, bins=bins, range=support, density=True)
    top = max(float(counts.max()), float(np.max(density))) * 1.05
    ax = _Axes(support, (0.0, top))
    body = ax.frame(title, "z", "density")
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = ax.px(a), ax.px(b)
        y = ax.py(c)
        body.append(f'<rect x="{_f(x0)}" y="{_f(y)}" width="{_f(x1 - x0)}" '
                    f'height="{_f(ax.py(0.0) - y)}" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>')
    g, d = _thin(np.asarray(grid), np.asarray(density))
    body.append(ax.polyline(g, d, "#d62728", 1.5))
    return _document(body)


# weight maps ------------------------------------------------------------------

def polygon_vertices(poly: Polyhedron) -> np.ndarray:
    """Vertices of a 2D polyhedron in counter-clockwise order.

    Every pair of facet lines is intersected and the intersections lying in
    the polygon are kept.
    """
    if poly.dim != 2:
        raise ValueError("polygon outlines need a two-dimensional polyhedron")
    n, b = poly.unit_normals, np.einsum("sd,sd->s", poly.U, poly.unit_normals)
    pts = []
    for i in range(poly.n_facets):
        for j in range(i + 1, poly.n_facets):
            A = np.array([n[i], n[j]])
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            p = np.linalg.solve(A, [b[i], b[j]])
            if np.min(poly.distances(p)) >= -1e-9:
                pts.append(p)
    pts = np.unique(np.round(np.array(pts), 12), axis=0)
    ang = np.arctan2(pts[:, 1] - poly.center[1], pts[:, 0] - poly.center[0])
    return pts[np.argsort(ang)]


def weight_field_grid(poly: Polyhedron, params: WeightParams, resolution: int):
    """Weights on a ``resolution``-point grid (per axis) over the bounding box.

    Returns ``(axes, values)``; values outside the polyhedron are NaN.
    """
    if poly.dim == 1:
        x = np.linspace(poly.lo[0], poly.hi[0], resolution)
        return (x,), weight(poly, params, x[:, None])
    if poly.dim != 2:
        raise ValueError(f"unsupported dimension {poly.dim}: weight plots are 1D or 2D")
    x = np.linspace(poly.lo[0], poly.hi[0], resolution)
    y = np.linspace(poly.lo[1], poly.hi[1], resolution)
    X, Y = np.meshgrid(x, y, indexing="xy")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = np.min(poly.distances(pts), axis=1) >= 0.0
    vals = np.full(len(pts), np.nan)
    vals[inside] = weight(poly, params, pts[inside])
    return (x, y), vals.reshape(X.shape)


def _color(v: float) -> str:
    # white (0) to dark blue (1)
    c0, c1 = np.array([255, 255, 255]), np.array([8, 48, 107])
    r, g, b = (c0 + (c1 - c0) * float(np.clip(v, 0.0, 1.0))).round().astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def plot_weight_field(poly: Polyhedron, params: WeightParams = WeightParams(),
                      resolution: int = 60, gamma: Optional[float] = 1.0, eps: float = 0.01,
                      title: str = "boundary weight") -> str:
    """SVG of the boundary weight with the outline of K and its Chebyshev center.

    In 2D the weight is drawn as a grid of colored cells and, when ``gamma``
    is given, arrows show the center pull on a coarse grid. In 1D the weight
    is drawn as a curve.
    """
    if poly.dim == 1:
        (x,), w = weight_field_grid(poly, params, resolution)
        ax = _Axes((x[0], x[-1]), (0.0, 1.05))
        body = ax.frame(title, "z", "w(z)")
        body.append(ax.polyline(x, w, PALETTE[0], 1.5))
        c = float(poly.center[0])
        body.append(f'<circle cx="{_f(ax.px(c))}" cy="{_f(ax.py(0.0))}" r="4" fill="#d62728" '
                    f'data-center="{c!r}"/>')
        return _document(body)
    (x, y), W = weight_field_grid(poly, params, resolution)
    size = 420
    span = max(x[-1] - x[0], y[-1] - y[0])
    ax = _Axes((x[0], x[0] + span), (y[0], y[0] + span), size, size, 40)
    body = ax.frame(title, "z_1", "z_2")
    dx = (x[1] - x[0]) if len(x) > 1 else span
    dy = (y[1] - y[0]) if len(y) > 1 else span
    cw = float(ax.px(dx) - ax.px(0.0))
    ch = float(ax.py(0.0) - ax.py(dy))
    for i, yy in enumerate(y):
        for j, xx in enumerate(x):
            v = W[i, j]
            if np.isnan(v):
                continue
            body.append(f'<rect x="{_f(ax.px(xx) - cw / 2)}" y="{_f(ax.py(yy) - ch / 2)}" '
                        f'width="{_f(cw)}" height="{_f(ch)}" fill="{_color(v)}"/>')
    verts = polygon_vertices(poly)
    pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(ax.px(verts[:, 0]), ax.py(verts[:, 1])))
    body.append(f'<polygon points="{pts}" fill="none" stroke="#000" stroke-width="1.5"/>')
    if gamma is not None:
        q = np.linspace(0.0, 1.0, 11)[1:-1]
        grid = np.array([[x[0] + a * (x[-1] - x[0]), y[0] + b * (y[-1] - y[0])] for b in q for a in q])
        grid = grid[np.min(poly.distances(grid), axis=1) > 0.0]
        pull = center_pull(poly, gamma, eps, grid)
        scale = 0.04 * span / gamma
        for p, c in zip(grid, pull):
            tip = p + scale * c
            body.append(f'<line x1="{_f(ax.px(p[0]))}" y1="{_f(ax.py(p[1]))}" '
                        f'x2="{_f(ax.px(tip[0]))}" y2="{_f(ax.py(tip[1]))}" '
                        f'stroke="#d62728" stroke-width="1"/>')
    cx, cy = (float(v) for v in poly.center)
    body.append(f'<circle cx="{_f(ax.px(cx))}" cy="{_f(ax.py(cy))}" r="4" fill="#d62728" '
                f'data-center="{cx!r},{cy!r}"/>')
    return _document(body, size, size)
