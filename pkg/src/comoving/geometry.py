"""Discrete boundary geometry: normals, measures, weak curvature and distances.

Curvature is never evaluated pointwise.  Curvature flow uses the weak form
``int_Gamma kappa nu . phi ds = int_Gamma div_Gamma phi ds`` and the right-hand
side is built from :func:`tangential_divergence_load` alone.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ._polygon import distance_to_polygon, hausdorff_distance
from .fem import basis_gradients, edge_unit_normals
from .mesh import FREE, Mesh

__all__ = [
    "edge_normals",
    "edge_midpoints",
    "boundary_length",
    "enclosed_area",
    "boundary_loop",
    "tangential_divergence_load",
    "zero_set_samples",
    "distance_to_levelset",
    "hausdorff_distance",
]


def edge_normals(mesh: Mesh, label: int = FREE) -> np.ndarray:
    """Outward unit normal of every labelled edge, ``(t2, -t1) / |t|``."""
    return edge_unit_normals(mesh, label)


def edge_midpoints(mesh: Mesh, label: int = FREE) -> np.ndarray:
    e = mesh.boundary_edges(label)
    return 0.5 * (mesh.nodes[e[:, 0]] + mesh.nodes[e[:, 1]])


def boundary_length(mesh: Mesh, label: int = FREE) -> float:
    return float(mesh.edge_lengths(label).sum())


def enclosed_area(mesh: Mesh, label: int = FREE) -> float:
    """Shoelace sum over the labelled closed polyline(s).

    Positive when the edges run counterclockwise, as the FREE boundary of an
    annulus does; the FIXED boundary runs clockwise and gives a negative value.
    """
    e = mesh.boundary_edges(label)
    a, b = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))


def boundary_loop(mesh: Mesh, label: int = FREE) -> np.ndarray:
    """Node indices of the labelled closed loop in edge order (single loop)."""
    e = mesh.boundary_edges(label)
    nxt = dict(zip(e[:, 0].tolist(), e[:, 1].tolist()))
    start = int(e[0, 0])
    loop = [start]
    node = nxt[start]
    while node != start:
        loop.append(node)
        node = nxt[node]
        if len(loop) > len(e):
            raise ValueError("boundary edges do not form a single closed loop")
    if len(loop) != len(e):
        raise ValueError("boundary edges form more than one loop")
    return np.array(loop)


def tangential_divergence_load(mesh: Mesh) -> np.ndarray:
    """``int_{Gamma_h} div_Gamma phi ds`` for every P1 vector basis function.

    On a straight FREE edge with unit normal ``nu`` the tangential divergence
    is ``div phi - (d phi / d nu) . nu``, evaluated with the constant gradient
    of the triangle adjacent to the edge.  For ``phi = psi_j e_c`` this equals
    the ``c``-th component of the tangential part of ``grad psi_j``.

    Returns
    -------
    (N_p, 2) array
        Entry ``[j, c]`` belongs to the basis function ``psi_j e_c``.
    """
    idx = mesh.edge_indices(FREE)
    tri_id = mesh.edge_triangle[idx]
    grads, _ = basis_gradients(mesh)
    g = grads[tri_id]  # (n_edges, 3, 2)
    nu = edge_normals(mesh, FREE)
    L = mesh.edge_lengths(FREE)
    normal_part = np.einsum("ejk,ek->ej", g, nu)
    tangential = g - normal_part[:, :, None] * nu[:, None, :]
    out = np.zeros_like(mesh.nodes)
    np.add.at(out, mesh.triangles[tri_id].ravel(), (L[:, None, None] * tangential).reshape(-1, 2))
    return out


# -- distance to an implicit curve -----------------------------------------------


def zero_set_samples(levelset, t: float, n: int = 4096) -> np.ndarray:
    """Points of ``{phi(., t) = 0}`` on ``n`` rays from ``levelset.anchor``.

    Assumes the zero set is star-shaped about the anchor, where ``phi < 0``.
    """
    c = np.asarray(getattr(levelset, "anchor", (0.0, 0.0)), dtype=float)
    th = 2 * np.pi * np.arange(n) / n
    d = np.column_stack([np.cos(th), np.sin(th)])
    if levelset.phi(c[None], t)[0] >= 0:
        raise ValueError("level set must be negative at its anchor")
    lo = np.zeros(n)
    hi = np.ones(n)
    for _ in range(64):
        pos = levelset.phi(c + hi[:, None] * d, t) > 0
        if pos.all():
            break
        lo = np.where(pos, lo, hi)
        hi = np.where(pos, hi, 2 * hi)
    else:
        raise ValueError("zero set is unbounded along some ray")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = levelset.phi(c + mid[:, None] * d, t) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return c + (0.5 * (lo + hi))[:, None] * d


def distance_to_levelset(x, levelset, t: float, n_samples: int = 4096, samples=None) -> np.ndarray:
    """Euclidean distance from points ``x`` to the zero set of ``levelset`` at time ``t``.

    The nearest of ``n_samples`` ray samples seeds a Newton iteration on the
    optimality system ``x - p = mu grad phi(p)``, ``phi(p) = 0``, which uses
    the exact gradient and Hessian of the level set.  A polyline distance
    through the samples is the fallback where Newton does not converge.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    Y = zero_set_samples(levelset, t, n_samples) if samples is None else samples
    _, k = cKDTree(Y).query(x)
    p = Y[k].copy()
    g = levelset.grad(p, t)
    mu = np.einsum("ij,ij->i", x - p, g) / np.einsum("ij,ij->i", g, g)
    eye = np.eye(2)
    for _ in range(30):
        g = levelset.grad(p, t)
        H = levelset.hess(p, t)
        F = np.concatenate([p - x + mu[:, None] * g, levelset.phi(p, t)[:, None]], axis=1)
        J = np.zeros((len(p), 3, 3))
        J[:, :2, :2] = eye + mu[:, None, None] * H
        J[:, :2, 2] = g
        J[:, 2, :2] = g
        singular = ~(np.abs(np.linalg.det(J)) > 1e-300)
        J[singular] = np.eye(3)
        step = np.linalg.solve(J, -F[..., None])[..., 0]
        step[singular] = 0.0
        step = np.where(np.isfinite(step), step, 0.0)
        p = p + step[:, :2]
        mu = mu + step[:, 2]
        if np.abs(step[:, :2]).max(initial=0.0) < 1e-15:
            break
    d_newton = np.linalg.norm(x - p, axis=1)
    d_poly = distance_to_polygon(x, Y)
    scale = max(1.0, float(np.abs(Y).max()))
    # chords cut inside convex arcs, so the polyline may undercut the true
    # distance by up to the sample spacing
    spacing = float(np.linalg.norm(np.roll(Y, -1, axis=0) - Y, axis=1).max())
    ok = (np.abs(levelset.phi(p, t)) < 1e-12 * scale) & (d_newton <= d_poly + spacing)
    d = np.where(ok, d_newton, d_poly)
    return d[0] if single else d
