"""Triangular annulus meshes, mesh motion, quality diagnostics and file I/O.

A :class:`Mesh` is an immutable P1 triangulation of an annular region
``Omega \\ B``.  Its boundary edges are labelled either ``FIXED`` (the inner
boundary ``dB``, never moved) or ``FREE`` (the moving boundary ``Gamma``).
Every boundary edge is oriented so that the domain lies on its left, which
makes the right-hand rotation of the edge direction the outward normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

FIXED = 0
FREE = 1

_LABEL_NAMES = {FIXED: "FIXED", FREE: "FREE"}


class MeshError(ValueError):
    """Raised when a mesh violates its structural invariants."""


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation with labelled, oriented boundary edges.

    Parameters
    ----------
    nodes : (N_p, 2) array_like
        Node coordinates.
    triangles : (N_e, 3) array_like of int
        Counterclockwise node-index triples.
    edges : (N_b, 2) array_like of int
        Boundary edges, oriented with the domain on the left.
    labels : (N_b,) array_like of int
        ``FIXED`` or ``FREE`` per boundary edge.

    Notes
    -----
    Construction does not reject inverted elements, since :func:`move_mesh`
    must be able to return a flagged (inverted) mesh.  Call :meth:`validate`
    for the full invariant check.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    labels: np.ndarray
    # topology-derived data, shared between meshes that differ only in node positions
    _topology: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = _readonly(self.nodes, float)
        tris = _readonly(self.triangles, np.int64)
        edges = _readonly(self.edges, np.int64).reshape(-1, 2)
        labels = _readonly(self.labels, np.int64).reshape(-1)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError(f"nodes must have shape (N, 2), got {nodes.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError(f"triangles must have shape (M, 3), got {tris.shape}")
        if len(edges) != len(labels):
            raise MeshError("edges and labels differ in length")
        if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
            raise MeshError("triangle references a non-existent node")
        if edges.size and (edges.min() < 0 or edges.max() >= len(nodes)):
            raise MeshError("boundary edge references a non-existent node")
        if not np.isin(labels, (FIXED, FREE)).all():
            raise MeshError("labels must be FIXED or FREE")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    # -- sizes ---------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    # -- topology (cached across node motion) --------------------------------

    def _topo(self, key, build):
        if key not in self._topology:
            self._topology[key] = build()
        return self._topology[key]

    def edge_indices(self, label: int) -> np.ndarray:
        """Indices into :attr:`edges` of the edges carrying ``label``."""

        def build():
            idx = np.flatnonzero(self.labels == label)
            idx.setflags(write=False)
            return idx

        return self._topo(("edge_indices", label), build)

    def boundary_edges(self, label: int) -> np.ndarray:
        """(n, 2) node pairs of the edges carrying ``label``, in stored order."""
        return self.edges[self.edge_indices(label)]

    def boundary_nodes(self, label: int) -> np.ndarray:
        """Sorted unique node indices touched by edges carrying ``label``."""

        def build():
            idx = np.unique(self.boundary_edges(label))
            idx.setflags(write=False)
            return idx

        return self._topo(("boundary_nodes", label), build)

    @property
    def fixed_nodes(self) -> np.ndarray:
        return self.boundary_nodes(FIXED)

    @property
    def free_nodes(self) -> np.ndarray:
        return self.boundary_nodes(FREE)

    @property
    def edge_triangle(self) -> np.ndarray:
        """Index of the unique triangle adjacent to every boundary edge."""

        def build():
            t = self.triangles
            local = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            owner = np.tile(np.arange(len(t)), 3)
            lookup = {(int(a), int(b)): int(k) for (a, b), k in zip(local, owner)}
            try:
                out = np.array([lookup[(int(a), int(b))] for a, b in self.edges], dtype=np.int64)
            except KeyError as exc:
                raise MeshError(
                    f"boundary edge {exc.args[0]} is not a counterclockwise triangle edge"
                ) from None
            out.setflags(write=False)
            return out

        return self._topo("edge_triangle", build)

    # -- geometry ------------------------------------------------------------

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        a = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        a.setflags(write=False)
        return a

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    @property
    def inverted(self) -> np.ndarray:
        """Indices of triangles whose signed area is not strictly positive."""
        return np.flatnonzero(self.signed_areas <= 0.0)

    @property
    def is_valid(self) -> bool:
        return self.inverted.size == 0

    def edge_lengths(self, label: int) -> np.ndarray:
        e = self.boundary_edges(label)
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    def with_nodes(self, nodes) -> "Mesh":
        """Same connectivity and labels, new node positions."""
        return Mesh(nodes, self.triangles, self.edges, self.labels, _topology=self._topology)

    def validate(self) -> None:
        """Check every structural invariant, raising :class:`MeshError`."""
        bad = self.inverted
        if bad.size:
            raise MeshError(f"{bad.size} triangle(s) with non-positive signed area, first {bad[0]}")
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        keys = np.sort(directed, axis=1)
        _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if counts.max(initial=0) > 2:
            raise MeshError("an edge is shared by more than two triangles")
        topo_boundary = {tuple(e) for e in directed[counts[inv] == 1].tolist()}
        stored = [tuple(e) for e in self.edges.tolist()]
        if len(set(stored)) != len(stored):
            raise MeshError("duplicate boundary edge")
        if set(stored) != topo_boundary:
            missing = topo_boundary - set(stored)
            extra = set(stored) - topo_boundary
            raise MeshError(
                f"boundary edges do not tile the boundary ({len(missing)} missing, "
                f"{len(extra)} not on the boundary or wrongly oriented)"
            )
        if np.intersect1d(self.fixed_nodes, self.free_nodes).size:
            raise MeshError("free boundary touches the fixed boundary")


@dataclass(frozen=True)
class QualityReport:
    """Exact minima over a mesh.

    ``min_edge`` and ``max_edge`` refer to FREE boundary edges only and are
    NaN when the mesh has none.
    """

    min_angle: float
    min_signed_area: float
    min_edge: float
    max_edge: float

    @property
    def edge_ratio(self) -> float:
        return self.max_edge / self.min_edge

    def __str__(self):
        return (
            f"min angle {np.degrees(self.min_angle):.3f} deg, "
            f"min signed area {self.min_signed_area:.3e}, "
            f"free edge length [{self.min_edge:.4g}, {self.max_edge:.4g}]"
        )


def triangle_angles(mesh: Mesh) -> np.ndarray:
    """(N_e, 3) interior angles, angle ``j`` at local vertex ``j``."""
    p = mesh.nodes[mesh.triangles]
    out = np.empty((len(p), 3))
    for j in range(3):
        a = p[:, (j + 1) % 3] - p[:, j]
        b = p[:, (j + 2) % 3] - p[:, j]
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        out[:, j] = np.arctan2(cross, np.einsum("ij,ij->i", a, b))
    return out


def mesh_quality(mesh: Mesh) -> QualityReport:
    edges = mesh.edge_lengths(FREE)
    return QualityReport(
        min_angle=float(triangle_angles(mesh).min()),
        min_signed_area=float(mesh.signed_areas.min()),
        min_edge=float(edges.min()) if edges.size else float("nan"),
        max_edge=float(edges.max()) if edges.size else float("nan"),
    )


def move_mesh(mesh: Mesh, w, tau: float) -> Mesh:
    """Advect every node along the nodal velocity ``w`` for one time step.

    Node ``i`` moves to ``x_i + tau * w_i``; connectivity and labels are
    unchanged and FIXED nodes keep their coordinates bit for bit.  The
    result may contain inverted elements, check ``result.is_valid``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != mesh.nodes.shape:
        raise ValueError(f"velocity must have shape {mesh.nodes.shape}, got {w.shape}")
    fixed = mesh.fixed_nodes
    if np.any(w[fixed] != 0.0):
        raise ValueError("velocity must vanish on FIXED boundary nodes")
    new = mesh.nodes + tau * w
    new[fixed] = mesh.nodes[fixed]
    return mesh.with_nodes(new)


# -- file formats ---------------------------------------------------------------


def write_vtk(mesh: Mesh, path, point_data=None, title="comoving mesh") -> Path:
    """Write a VTK legacy ASCII 3.0 unstructured grid.

    Triangles are written as cell type 5 and boundary edges as cell type 3
    (lines).  ``CELL_DATA`` carries ``label``: -1 for triangles, 0 for FIXED
    and 1 for FREE edges.  ``point_data`` maps names to nodal scalar
    (N,) or vector (N, 2) arrays.
    """
    path = Path(path)
    n, m, b = mesh.n_nodes, mesh.n_triangles, len(mesh.edges)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {n} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    lines.append(f"CELLS {m + b} {4 * m + 3 * b}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"2 {i} {j}" for i, j in mesh.edges.tolist()]
    lines.append(f"CELL_TYPES {m + b}")
    lines += ["5"] * m + ["3"] * b
    lines.append(f"CELL_DATA {m + b}")
    lines += ["SCALARS label int 1", "LOOKUP_TABLE default"]
    lines += ["-1"] * m + [str(v) for v in mesh.labels.tolist()]
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape == (n,):
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [repr(v) for v in values.tolist()]
            elif values.shape == (n, 2):
                lines.append(f"VECTORS {name} double")
                lines += [f"{x!r} {y!r} 0.0" for x, y in values.tolist()]
            else:
                raise ValueError(f"point data {name!r} has shape {values.shape}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path) -> Mesh:
    """Read back a file produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens)
    header = [next(it) for _ in range(4)]
    if not header[0].startswith("# vtk DataFile Version"):
        raise ValueError("not a VTK legacy file")
    if header[2].strip() != "ASCII" or header[3].split()[1] != "UNSTRUCTURED_GRID":
        raise ValueError("only ASCII unstructured grids are supported")
    n = int(next(it).split()[1])
    nodes = np.array([next(it).split()[:2] for _ in range(n)], dtype=float)
    n_cells = int(next(it).split()[1])
    cells = [list(map(int, next(it).split())) for _ in range(n_cells)]
    next(it)
    types = [int(next(it)) for _ in range(n_cells)]
    next(it), next(it), next(it)
    labels = [int(next(it)) for _ in range(n_cells)]
    tris = [c[1:] for c, t in zip(cells, types) if t == 5]
    edges = [c[1:] for c, t in zip(cells, types) if t == 3]
    edge_labels = [lab for lab, t in zip(labels, types) if t == 3]
    return Mesh(nodes, np.array(tris).reshape(-1, 3), np.array(edges).reshape(-1, 2), edge_labels)


def write_mesh_text(mesh: Mesh, path) -> Path:
    """Plain-text node/element format.

    Line 1 is ``N_p N_e N_b``; then ``N_p`` lines ``x y``, ``N_e`` lines
    ``i j k`` and ``N_b`` lines ``i j label`` with label 0 = FIXED, 1 = FREE.
    """
    path = Path(path)
    lines = [f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"{i} {j} {lab}" for (i, j), lab in zip(mesh.edges.tolist(), mesh.labels.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mesh_text(path) -> Mesh:
    rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    n, m, b = map(int, rows[0])
    if len(rows) != 1 + n + m + b:
        raise ValueError(f"expected {1 + n + m + b} lines, found {len(rows)}")
    nodes = np.array(rows[1 : 1 + n], dtype=float)
    tris = np.array(rows[1 + n : 1 + n + m], dtype=np.int64).reshape(-1, 3)
    eb = np.array(rows[1 + n + m :], dtype=np.int64).reshape(-1, 3)
    return Mesh(nodes, tris, eb[:, :2], eb[:, 2])
