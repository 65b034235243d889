"""Closed boundary curves and the annulus mesh generator.

The generator places boundary nodes at (approximately) uniform arc length
spacing ``h`` on both curves, fills the region in between with a hexagonal
lattice and relaxes the interior nodes with a few spring-force sweeps in the
style of DistMesh, retriangulating by Delaunay after every sweep.  Interior
nodes are kept out of the diametral circles of the boundary segments, so
every boundary segment is a Delaunay edge and the final triangulation
conforms to both polygons.

Along the outer curve a layer of nodes is placed at the apex of the
equilateral triangle over every segment (where room allows) and kept out of
the relaxation.  The triangles touching the outer boundary are then nearly
congruent, which keeps the piecewise constant boundary flux of a P1
solution free of element-to-element noise.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from ._polygon import distance_to_polygon, points_in_polygon, polygon_area
from .mesh import FIXED, FREE, Mesh, MeshError

__all__ = [
    "Curve",
    "Circle",
    "Ellipse",
    "PolarCurve",
    "RoundedRectangle",
    "Polygon",
    "l_shape",
    "generate_annulus_mesh",
]


class Curve:
    """Closed planar curve, counterclockwise, parametrized over ``s in [0, 1)``.

    Subclasses implement :meth:`__call__`; :meth:`sample` picks parameters
    so that consecutive samples are equally spaced in arc length.
    """

    def __call__(self, s):
        raise NotImplementedError

    def _dense(self, n=20000):
        s = np.arange(n) / n
        p = self(s)
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        return s, np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._dense()[1][-1])

    def sample(self, h: float) -> np.ndarray:
        """Nodes on the curve, counterclockwise, spaced by at most about ``h``."""
        s, arc = self._dense()
        total = arc[-1]
        n = max(3, int(np.ceil(total / h)))
        target = total * np.arange(n) / n
        s_closed = np.concatenate([s, [1.0]])
        return self(np.interp(target, arc, s_closed))


class Circle(Curve):
    def __init__(self, radius, center=(0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, s):
        th = 2 * np.pi * np.asarray(s, dtype=float)
        return self.center + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)

    @property
    def length(self):
        return 2 * np.pi * self.radius

    def sample(self, h):
        n = max(3, int(np.ceil(self.length / h)))
        return self(np.arange(n) / n)

    def __repr__(self):
        return f"Circle(radius={self.radius}, center={tuple(self.center)})"


class Ellipse(Curve):
    """Ellipse ``(x/a)^2 + (y/b)^2 = 1`` about ``center``."""

    def __init__(self, a, b, center=(0.0, 0.0)):
        self.a, self.b = float(a), float(b)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, s):
        th = 2 * np.pi * np.asarray(s, dtype=float)
        return self.center + np.stack([self.a * np.cos(th), self.b * np.sin(th)], axis=-1)

    def __repr__(self):
        return f"Ellipse(a={self.a}, b={self.b})"


class PolarCurve(Curve):
    """Star-shaped curve ``r = radius(theta)`` about ``center``."""

    def __init__(self, radius, center=(0.0, 0.0), name="PolarCurve"):
        self.radius = radius
        self.center = np.asarray(center, dtype=float)
        self.name = name

    def __call__(self, s):
        th = 2 * np.pi * np.asarray(s, dtype=float)
        r = self.radius(th)
        return self.center + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def __repr__(self):
        return self.name


class RoundedRectangle(Curve):
    """Axis-aligned rectangle with circular corners, arc-length parametrized."""

    def __init__(self, width, height, corner_radius, center=(0.0, 0.0)):
        self.width, self.height = float(width), float(height)
        self.corner_radius = float(corner_radius)
        self.center = np.asarray(center, dtype=float)
        if not 0 <= self.corner_radius <= min(self.width, self.height) / 2:
            raise ValueError("corner radius must lie in [0, min(width, height)/2]")

    @property
    def length(self):
        rho = self.corner_radius
        return 2 * (self.width + self.height) - 8 * rho + 2 * np.pi * rho

    def _pieces(self):
        A, B, rho = self.width / 2, self.height / 2, self.corner_radius
        quarter = np.pi * rho / 2
        # (kind, length, data): start at (A, 0) and go counterclockwise
        return [
            ("line", B - rho, ((A, 0.0), (0.0, 1.0))),
            ("arc", quarter, ((A - rho, B - rho), 0.0)),
            ("line", 2 * (A - rho), ((A - rho, B), (-1.0, 0.0))),
            ("arc", quarter, ((-A + rho, B - rho), np.pi / 2)),
            ("line", 2 * (B - rho), ((-A, B - rho), (0.0, -1.0))),
            ("arc", quarter, ((-A + rho, -B + rho), np.pi)),
            ("line", 2 * (A - rho), ((-A + rho, -B), (1.0, 0.0))),
            ("arc", quarter, ((A - rho, -B + rho), 1.5 * np.pi)),
            ("line", B - rho, ((A, -B + rho), (0.0, 1.0))),
        ]

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float)) % 1.0
        arc = s * self.length
        out = np.empty((len(s), 2))
        start = 0.0
        rho = self.corner_radius
        pieces = self._pieces()
        for i, (kind, length, data) in enumerate(pieces):
            last = i == len(pieces) - 1
            sel = (arc >= start) & ((arc < start + length) | last)
            local = arc[sel] - start
            if kind == "line":
                p0, d = np.asarray(data[0]), np.asarray(data[1])
                out[sel] = p0 + local[:, None] * d
            else:
                c, phi0 = np.asarray(data[0]), data[1]
                phi = phi0 + (local / rho if rho > 0 else 0.0)
                out[sel] = c + rho * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
            start += length
        return self.center + out

    def sample(self, h):
        n = max(3, int(np.ceil(self.length / h)))
        return self(np.arange(n) / n)

    def __repr__(self):
        return (
            f"RoundedRectangle({self.width} x {self.height}, "
            f"corner radius {self.corner_radius})"
        )


class Polygon(Curve):
    """Closed polygon through counterclockwise ``vertices``; corners are always nodes."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if polygon_area(v) <= 0:
            raise ValueError("polygon vertices must be counterclockwise")
        self.vertices = v

    @property
    def length(self):
        return float(np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1).sum())

    def __call__(self, s):
        v = self.vertices
        seg = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        t = (np.atleast_1d(np.asarray(s, dtype=float)) % 1.0) * arc[-1]
        k = np.clip(np.searchsorted(arc, t, side="right") - 1, 0, len(v) - 1)
        frac = (t - arc[k]) / seg[k]
        return v[k] + frac[:, None] * (np.roll(v, -1, axis=0)[k] - v[k])

    def sample(self, h):
        v = self.vertices
        out = []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            m = max(1, int(np.ceil(np.linalg.norm(b - a) / h)))
            out.append(a + (np.arange(m) / m)[:, None] * (b - a))
        return np.concatenate(out)

    def __repr__(self):
        return f"Polygon({self.vertices.tolist()})"


def l_shape(half=0.25):
    """The square ``(-half, half)^2`` minus its upper-right quadrant ``[0, half]^2``."""
    a = half
    return Polygon([(-a, -a), (a, -a), (a, 0.0), (0.0, 0.0), (0.0, a), (-a, a)])


def _hex_lattice(lo, hi, h):
    dy = h * np.sqrt(3) / 2
    ys = np.arange(lo[1], hi[1] + dy, dy)
    xs = np.arange(lo[0], hi[0] + h, h)
    X, Y = np.meshgrid(xs, ys)
    X = X + (np.arange(len(ys))[:, None] % 2) * (h / 2)
    return np.column_stack([X.ravel(), Y.ravel()])


def _admissible(p, outer_poly, inner_poly, centers, radii, circle_tree, bnd_tree, h):
    """Interior-node constraint: inside the annulus, outside the protected circles."""
    ok = points_in_polygon(p, outer_poly) & ~points_in_polygon(p, inner_poly)
    k = min(8, len(centers))
    d, idx = circle_tree.query(p, k=k)
    d, idx = d.reshape(len(p), k), idx.reshape(len(p), k)
    ok &= np.all(d > radii[idx], axis=1)
    ok &= bnd_tree.query(p)[0] > 0.45 * h
    return ok


def _boundary_layer(po, pi, h):
    """Apex nodes over the outer segments and the circumcircles they protect.

    An apex is dropped when it would crowd another apex, a boundary node or
    the inner curve, or when it falls outside the annulus.
    """
    a, b = po, np.roll(po, -1, axis=0)
    e = b - a
    L = np.linalg.norm(e, axis=1)
    inward = np.column_stack([-e[:, 1], e[:, 0]]) / L[:, None]
    mid = 0.5 * (a + b)
    height = 0.5 * np.sqrt(3) * L
    apex = mid + height[:, None] * inward
    # circumcircle of the isosceles triangle (a, b, apex)
    R = (0.25 * L**2 + height**2) / (2 * height)
    cen = apex - R[:, None] * inward

    ok = points_in_polygon(apex, po) & ~points_in_polygon(apex, pi)
    ok &= distance_to_polygon(apex, pi) > 0.5 * h
    ok &= distance_to_polygon(apex, po) > 0.6 * height
    bnd = cKDTree(np.concatenate([po, pi]))
    ok &= bnd.query(apex)[0] > 0.7 * h
    keep = []
    for i in np.flatnonzero(ok):
        if all(
            np.linalg.norm(apex[i] - apex[j]) > 0.75 * h
            and np.linalg.norm(apex[i] - cen[j]) > 1.05 * R[j]
            and np.linalg.norm(apex[j] - cen[i]) > 1.05 * R[i]
            for j in keep[-6:] + keep[:6]
        ):
            keep.append(i)
    keep = np.array(keep, dtype=int)
    return apex[keep], cen[keep], 1.05 * R[keep]


def _delaunay_inside(p, outer_poly, inner_poly):
    tri = Delaunay(p).simplices
    c = p[tri].mean(axis=1)
    keep = points_in_polygon(c, outer_poly) & ~points_in_polygon(c, inner_poly)
    return tri[keep]


def generate_annulus_mesh(
    outer: Curve, inner: Curve, h: float, smoothing_steps: int = 25, boundary_layer: bool = False
) -> Mesh:
    """Triangulate the region between ``inner`` (FIXED) and ``outer`` (FREE).

    Parameters
    ----------
    outer, inner : Curve
        Closed curves; ``inner`` must lie strictly inside ``outer``.
    h : float
        Target mesh width.  Boundary nodes lie on the curves.
    smoothing_steps : int
        Number of force-relaxation sweeps applied to the interior nodes.
    boundary_layer : bool
        Place a fixed layer of equilateral apex nodes along the outer curve.

    Raises
    ------
    ValueError
        If ``h <= 0``, if the curves intersect, or if ``h`` exceeds the gap
        between them.
    MeshError
        If the relaxed triangulation does not conform to the boundary.
    """
    if not h > 0:
        raise ValueError(f"mesh width must be positive, got {h}")
    po = np.asarray(outer.sample(h), dtype=float)
    pi = np.asarray(inner.sample(h), dtype=float)
    if polygon_area(po) <= 0 or polygon_area(pi) <= 0:
        raise ValueError("curves must be counterclockwise")
    if not points_in_polygon(pi, po).all() or points_in_polygon(po, pi).any():
        raise ValueError("inner and outer boundaries intersect")
    gap = min(distance_to_polygon(pi, po).min(), distance_to_polygon(po, pi).min())
    if gap < 0.5 * h:
        raise ValueError(f"mesh width h={h} is too large for the annulus gap {gap:.4g}")

    n_out, n_in = len(po), len(pi)
    seg_a = np.concatenate([po, pi])
    seg_b = np.concatenate([np.roll(po, -1, axis=0), np.roll(pi, -1, axis=0)])
    centers = 0.5 * (seg_a + seg_b)
    radii = 0.55 * np.linalg.norm(seg_b - seg_a, axis=1)
    fixed_pts = np.concatenate([po, pi])
    if boundary_layer:
        apex, cen, rad = _boundary_layer(po, pi, h)
        fixed_pts = np.concatenate([fixed_pts, apex])
        centers = np.concatenate([centers, cen])
        radii = np.concatenate([radii, rad])
    circle_tree = cKDTree(centers)
    bnd_tree = cKDTree(fixed_pts)

    lo = np.minimum(po.min(axis=0), pi.min(axis=0))
    hi = np.maximum(po.max(axis=0), pi.max(axis=0))
    q = _hex_lattice(lo, hi, h)
    q = q[_admissible(q, po, pi, centers, radii, circle_tree, bnd_tree, h)]
    nf = len(fixed_pts)

    for _ in range(smoothing_steps):
        p = np.concatenate([fixed_pts, q])
        tri = _delaunay_inside(p, po, pi)
        bars = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        L0 = 1.2 * np.sqrt(np.mean(L**2))
        F = np.maximum(L0 - L, 0.0)
        fvec = (F / L)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        trial = q + 0.2 * ftot[nf:]
        ok = _admissible(trial, po, pi, centers, radii, circle_tree, bnd_tree, h)
        q = np.where(ok[:, None], trial, q)

    p = np.concatenate([fixed_pts, q])
    tri = _delaunay_inside(p, po, pi)
    used = np.zeros(len(p), dtype=bool)
    used[tri.ravel()] = True
    if not used[:nf].all():
        raise MeshError("a boundary node is not part of the triangulation")
    renum = np.cumsum(used) - 1
    p, tri = p[used], renum[tri]

    d1 = p[tri[:, 1]] - p[tri[:, 0]]
    d2 = p[tri[:, 2]] - p[tri[:, 0]]
    cw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[cw] = tri[cw][:, [0, 2, 1]]

    io = np.arange(n_out)
    ii = n_out + np.arange(n_in)
    free_edges = np.column_stack([io, np.roll(io, -1)])
    # inner curve is sampled counterclockwise; reversing puts the annulus on the left
    fixed_edges = np.column_stack([np.roll(ii, -1), ii])
    edges = np.concatenate([free_edges, fixed_edges])
    labels = np.concatenate([np.full(n_out, FREE), np.full(n_in, FIXED)])
    mesh = Mesh(p, tri, edges, labels)
    mesh.validate()
    return mesh
