"""Vectorized closed-polygon predicates shared by the mesh generator and metrics."""

import numpy as np
from scipy.spatial import cKDTree


def points_in_polygon(points, poly):
    """Crossing-number inside test of ``points`` (n, 2) against a closed polygon.

    Points are sorted by ``y`` so each edge only visits the points inside
    its half-open ``y`` band; the cost scales with the number of crossings.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(poly, dtype=float)
    order = np.argsort(points[:, 1], kind="stable")
    ys = points[order, 1]
    a, b = poly, np.roll(poly, -1, axis=0)
    lo = np.searchsorted(ys, np.minimum(a[:, 1], b[:, 1]), side="left")
    hi = np.searchsorted(ys, np.maximum(a[:, 1], b[:, 1]), side="left")
    counts = hi - lo
    total = int(counts.sum())
    inside = np.zeros(len(points), dtype=bool)
    if total == 0:
        return inside
    edge = np.repeat(np.arange(len(poly)), counts)
    offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    pts = order[lo[edge] + offset]
    ax, ay, bx, by = a[edge, 0], a[edge, 1], b[edge, 0], b[edge, 1]
    y = points[pts, 1]
    xcross = ax + (y - ay) * (bx - ax) / (by - ay)
    hits = pts[points[pts, 0] < xcross]
    return (np.bincount(hits, minlength=len(points)) % 2).astype(bool)


def segment_distance(points, a, b):
    """Distance from each point to the segment ``[a, b]`` (row-wise broadcast)."""
    d = b - a
    dd = np.einsum("...i,...i->...", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dd > 0, np.einsum("...i,...i->...", points - a, d) / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(points - (a + s[..., None] * d), axis=-1)


def distance_to_polygon(points, poly, k=6):
    """Distance from ``points`` to the closed polyline through ``poly``.

    Candidate segments are those adjacent to the ``k`` nearest vertices,
    which is exact for the nearly uniform polygons used here.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    k = min(k, n)
    _, idx = cKDTree(poly).query(points, k=k)
    idx = np.asarray(idx).reshape(len(points), k)
    cand = np.concatenate([idx, (idx - 1) % n], axis=1)
    a = poly[cand]
    b = poly[(cand + 1) % n]
    return segment_distance(points[:, None, :], a, b).min(axis=1)


def polygon_area(poly):
    """Signed shoelace area, positive for counterclockwise vertex order."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def densify(poly, spacing):
    """Insert points so consecutive vertices are at most ``spacing`` apart."""
    poly = np.asarray(poly, dtype=float)
    nxt = np.roll(poly, -1, axis=0)
    out = []
    for a, b in zip(poly, nxt):
        m = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        s = np.arange(m)[:, None] / m
        out.append(a + s * (b - a))
    return np.concatenate(out)


def hausdorff_distance(poly_a, poly_b, spacing=None):
    """Symmetric Hausdorff distance between two closed polylines."""
    poly_a = np.asarray(poly_a, dtype=float)
    poly_b = np.asarray(poly_b, dtype=float)
    if spacing is not None:
        pa, pb = densify(poly_a, spacing), densify(poly_b, spacing)
    else:
        pa, pb = poly_a, poly_b
    return max(
        float(distance_to_polygon(pa, poly_b).max()),
        float(distance_to_polygon(pb, poly_a).max()),
    )
