"""Small hand-built meshes shared by the tests."""

import numpy as np

from comoving.mesh import FIXED, FREE, Mesh


def polygon_annulus(n_outer=16, n_inner=8, r_outer=1.0, r_inner=0.5):
    """Structured annulus of two node rings, useful for small exact checks."""
    if n_outer != 2 * n_inner:
        raise ValueError("n_outer must be twice n_inner")
    th_o = 2 * np.pi * np.arange(n_outer) / n_outer
    th_i = 2 * np.pi * np.arange(n_inner) / n_inner
    outer = r_outer * np.column_stack([np.cos(th_o), np.sin(th_o)])
    inner = r_inner * np.column_stack([np.cos(th_i), np.sin(th_i)])
    nodes = np.concatenate([outer, inner])
    o = lambda k: k % n_outer  # noqa: E731
    i = lambda k: n_outer + k % n_inner  # noqa: E731
    tris = []
    for k in range(n_inner):
        tris += [(i(k), o(2 * k), o(2 * k + 1)), (i(k), o(2 * k + 1), i(k + 1)), (i(k + 1), o(2 * k + 1), o(2 * k + 2))]
    edges = [(o(k), o(k + 1)) for k in range(n_outer)] + [(i(k + 1), i(k)) for k in range(n_inner)]
    labels = [FREE] * n_outer + [FIXED] * n_inner
    return Mesh(nodes, tris, edges, labels)


def unit_square_mesh(n=4):
    """Unit square split into ``2 n^2`` triangles, all boundary edges FREE."""
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda a, b: b * (n + 1) + a  # noqa: E731
    tris = []
    for b in range(n):
        for a in range(n):
            tris += [(idx(a, b), idx(a + 1, b), idx(a + 1, b + 1)), (idx(a, b), idx(a + 1, b + 1), idx(a, b + 1))]
    edges = (
        [(idx(a, 0), idx(a + 1, 0)) for a in range(n)]
        + [(idx(n, b), idx(n, b + 1)) for b in range(n)]
        + [(idx(a + 1, n), idx(a, n)) for a in range(n)]
        + [(idx(0, b + 1), idx(0, b)) for b in range(n)]
    )
    return Mesh(nodes, tris, edges, [FREE] * len(edges))


def circle_error(mesh, R):
    """Largest deviation of FREE node radii from ``R``."""
    r = np.linalg.norm(mesh.nodes[mesh.free_nodes], axis=1)
    return float(np.abs(r - R).max())

