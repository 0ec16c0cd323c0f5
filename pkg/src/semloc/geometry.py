"""Planar polygon primitives: areas, first and second moments, clipping, hulls.

Polygons are (n, 2) float arrays of vertices in traversal order.  Either
winding is accepted; routines that need a magnitude work from the signed
area.  No routine closes the ring explicitly, the wrap-around edge is
implied.
"""

from __future__ import annotations

import numpy as np

AREA_EPS = 1e-12


def as_polygon(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise ValueError(f"polygon must be an (n, 2) array, got shape {v.shape}")
    return v


def polygon_signed_area(vertices) -> float:
    v = as_polygon(vertices)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_area(vertices) -> float:
    return abs(polygon_signed_area(vertices))


def polygon_moments(vertices) -> tuple[float, np.ndarray, np.ndarray]:
    """Area, centroid and central second moments of a simple polygon.

    Closed-form Green's-theorem sums over edges, exact for straight edges.
    The covariance is that of the uniform density over the interior; no
    conditioning floor is applied here.  A degenerate (zero-area) input
    yields the vertex mean and a zero covariance.
    """
    v = as_polygon(vertices)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    if abs(a) < AREA_EPS:
        return 0.0, v.mean(axis=0), np.zeros((2, 2))
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    exx = float(np.sum((x * x + x * xn + xn * xn) * cross)) / (12.0 * a)
    eyy = float(np.sum((y * y + y * yn + yn * yn) * cross)) / (12.0 * a)
    exy = float(np.sum((x * yn + 2.0 * x * y + 2.0 * xn * yn + xn * y) * cross)) / (24.0 * a)
    mean = np.array([cx, cy])
    cov = np.array([[exx - cx * cx, exy - cx * cy], [exy - cx * cy, eyy - cy * cy]])
    return abs(a), mean, cov


def clip_halfplane(vertices, point, normal) -> np.ndarray:
    """Sutherland-Hodgman step: keep the region where (p - point) . normal >= 0."""
    v = as_polygon(vertices)
    if len(v) == 0:
        return v
    point = np.asarray(point, dtype=float)
    normal = np.asarray(normal, dtype=float)
    d = (v - point) @ normal
    out: list[np.ndarray] = []
    n = len(v)
    for i in range(n):
        j = (i + 1) % n
        si, sj = d[i], d[j]
        if si >= 0.0:
            out.append(v[i])
            if sj < 0.0:
                t = si / (si - sj)
                out.append(v[i] + t * (v[j] - v[i]))
        elif sj >= 0.0:
            t = si / (si - sj)
            out.append(v[i] + t * (v[j] - v[i]))
    if not out:
        return np.zeros((0, 2))
    return np.array(out)


def clip_rect(vertices, xmin: float, ymin: float, xmax: float, ymax: float) -> np.ndarray:
    """Clip a polygon to an axis-aligned rectangle."""
    v = as_polygon(vertices)
    for point, normal in (
        ((xmin, 0.0), (1.0, 0.0)),
        ((xmax, 0.0), (-1.0, 0.0)),
        ((0.0, ymin), (0.0, 1.0)),
        ((0.0, ymax), (0.0, -1.0)),
    ):
        v = clip_halfplane(v, point, normal)
        if len(v) == 0:
            break
    return v


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull in counter-clockwise order; collinear points dropped."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    p = np.unique(p, axis=0)  # sorts lexicographically
    if len(p) <= 2:
        return p

    def build(seq):
        chain: list[np.ndarray] = []
        for q in seq:
            while len(chain) >= 2:
                a = chain[-1] - chain[-2]
                b = q - chain[-2]
                if a[0] * b[1] - a[1] * b[0] > 0.0:
                    break
                chain.pop()
            chain.append(q)
        return chain

    lower = build(p)
    upper = build(p[::-1])
    return np.array(lower[:-1] + upper[:-1])
