import math

import numpy as np
import pytest
from helpers import polygon_annulus

from comoving import Circle, Ellipse, Polygon, RoundedRectangle, generate_annulus_mesh, l_shape
from comoving.mesh import (
    FIXED,
    FREE,
    Mesh,
    MeshError,
    mesh_quality,
    move_mesh,
    read_mesh_text,
    read_vtk,
    triangle_angles,
    write_mesh_text,
    write_vtk,
)


def single(p):
    return Mesh(p, [(0, 1, 2)], [(0, 1), (1, 2), (2, 0)], [FREE] * 3)


# -- generation -------------------------------------------------------------------


def test_circle_annulus_is_valid(annulus_010):
    m = annulus_010
    m.validate()
    assert np.all(m.signed_areas > 0)
    r = np.linalg.norm(m.nodes, axis=1)
    chord = 0.1**2 / 2
    assert r.min() >= 0.5 - chord and r.max() <= 1.0 + 1e-12
    assert np.allclose(np.linalg.norm(m.nodes[m.free_nodes], axis=1), 1.0)
    assert np.allclose(np.linalg.norm(m.nodes[m.fixed_nodes], axis=1), 0.5)


def test_max_edge_close_to_h(annulus_010):
    t = annulus_010.triangles
    p = annulus_010.nodes
    lengths = np.linalg.norm(p[t] - p[np.roll(t, -1, axis=1)], axis=2)
    assert lengths.max() < 1.6 * 0.1
    assert np.median(lengths) == pytest.approx(0.1, rel=0.25)


def test_every_boundary_edge_has_one_triangle(annulus_010):
    m = annulus_010
    owner = m.edge_triangle
    assert len(owner) == len(m.edges)
    tri_edges = {(int(a), int(b)) for tri in m.triangles for a, b in zip(tri, np.roll(tri, -1))}
    assert all((int(a), int(b)) in tri_edges for a, b in m.edges)


def test_example2_ellipse_domain():
    m = generate_annulus_mesh(Ellipse(math.sqrt(2), 1.0), Circle(0.5), 0.1)
    m.validate()
    p = m.nodes[m.free_nodes]
    assert np.allclose(0.5 * p[:, 0] ** 2 + p[:, 1] ** 2, 1.0)


@pytest.mark.parametrize(
    "outer",
    [RoundedRectangle(1.2, 1.2, 0.2), RoundedRectangle(1.6, 1.0, 0.2), Circle(0.6)],
)
def test_bernoulli_initial_domains(outer):
    m = generate_annulus_mesh(outer, l_shape(0.25), 0.05)
    m.validate()
    assert mesh_quality(m).min_angle > math.radians(15)


def test_boundary_layer_mesh():
    m = generate_annulus_mesh(Ellipse(math.sqrt(2), 1.0), Circle(0.5), 0.1, boundary_layer=True)
    m.validate()
    # the triangles carrying the FREE edges are nearly equilateral
    ang = np.degrees(np.sort(triangle_angles(m)[m.edge_triangle[m.edge_indices(FREE)]], axis=1))
    assert ang[:, 0].min() > 50


def test_h_larger_than_gap_rejected():
    with pytest.raises(ValueError, match="too large"):
        generate_annulus_mesh(Circle(1.0), Circle(0.9), 0.5)


def test_intersecting_curves_rejected():
    with pytest.raises(ValueError, match="intersect"):
        generate_annulus_mesh(Circle(1.0), Ellipse(1.5, 0.3), 0.1)


def test_nonpositive_h_rejected():
    with pytest.raises(ValueError):
        generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.0)


def test_clockwise_polygon_rejected():
    with pytest.raises(ValueError):
        Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])


def test_generation_is_deterministic():
    a = generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.2)
    b = generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.2)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.triangles, b.triangles)


# -- construction and validation ------------------------------------------------------


def test_mesh_arrays_are_read_only(annulus_010):
    with pytest.raises(ValueError):
        annulus_010.nodes[0, 0] = 3.0


def test_bad_label_rejected():
    with pytest.raises(MeshError):
        Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [(0, 1)], [7])


def test_out_of_range_triangle_rejected():
    with pytest.raises(MeshError):
        Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 3)], [], [])


def test_wrongly_oriented_edge_rejected():
    m = Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [(1, 0), (1, 2), (2, 0)], [FREE] * 3)
    with pytest.raises(MeshError):
        m.validate()


def test_missing_boundary_edge_rejected():
    m = Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [(0, 1), (1, 2)], [FREE] * 2)
    with pytest.raises(MeshError, match="tile"):
        m.validate()


def test_inverted_triangle_detected():
    m = Mesh([(0, 0), (0, 1), (1, 0)], [(0, 1, 2)], [(0, 1), (1, 2), (2, 0)], [FREE] * 3)
    assert not m.is_valid
    with pytest.raises(MeshError, match="signed area"):
        m.validate()


def test_polygon_annulus_helper_is_valid():
    polygon_annulus().validate()


# -- move_mesh ---------------------------------------------------------------------


def test_zero_velocity_is_identity(annulus_010):
    out = move_mesh(annulus_010, np.zeros_like(annulus_010.nodes), 0.3)
    assert np.array_equal(out.nodes, annulus_010.nodes)
    assert out.triangles is annulus_010.triangles or np.array_equal(out.triangles, annulus_010.triangles)


def test_uniform_translation(annulus_010):
    m = annulus_010
    w = np.zeros_like(m.nodes)
    movable = np.setdiff1d(np.arange(m.n_nodes), m.fixed_nodes)
    w[movable] = (1.0, 0.0)
    out = move_mesh(m, w, 0.1)
    assert np.allclose(out.nodes[movable] - m.nodes[movable], (0.1, 0.0))
    assert np.array_equal(out.nodes[m.fixed_nodes], m.nodes[m.fixed_nodes])
    assert np.array_equal(out.labels, m.labels)


def test_thin_triangle_inverts():
    # oracle: apex (0.5, 0.05) pushed down by 0.1 lands at (0.5, -0.05), below the base
    m = Mesh([(0, 0), (1, 0), (0.5, 0.05)], [(0, 1, 2)], [(0, 1), (1, 2), (2, 0)], [FREE] * 3)
    w = np.array([[0, 0], [0, 0], [0, -1.0]])
    out = move_mesh(m, w, 0.1)
    assert not out.is_valid
    assert out.signed_areas[0] == pytest.approx(-0.025)


def test_velocity_on_fixed_nodes_rejected():
    m = polygon_annulus()
    w = np.zeros_like(m.nodes)
    w[m.fixed_nodes[0]] = 1.0
    with pytest.raises(ValueError):
        move_mesh(m, w, 0.1)


def test_velocity_shape_checked():
    m = polygon_annulus()
    with pytest.raises(ValueError):
        move_mesh(m, np.zeros((3, 2)), 0.1)


# -- quality ------------------------------------------------------------------------


def test_quality_equilateral():
    q = mesh_quality(single([(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)]))
    assert q.min_angle == pytest.approx(math.pi / 3)
    assert q.edge_ratio == pytest.approx(1.0)


def test_quality_right_isosceles():
    # oracle: min angle pi/4, area 1/2
    q = mesh_quality(single([(0, 0), (1, 0), (0, 1)]))
    assert q.min_angle == pytest.approx(math.pi / 4)
    assert q.min_signed_area == pytest.approx(0.5)


def test_quality_collinear():
    q = mesh_quality(single([(0, 0), (1, 0), (2, 0)]))
    assert q.min_signed_area == 0.0
    assert q.min_angle == pytest.approx(0.0)


def test_quality_report_str(annulus_010):
    assert "min angle" in str(mesh_quality(annulus_010))


# -- file formats -------------------------------------------------------------------


def test_vtk_round_trip(tmp_path, annulus_010):
    m = annulus_010
    u = np.linalg.norm(m.nodes, axis=1)
    path = write_vtk(m, tmp_path / "m.vtk", point_data={"u": u, "w": m.nodes.copy()})
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert f"POINTS {m.n_nodes} double" in text
    b = len(m.edges)
    assert f"CELLS {m.n_triangles + b} {4 * m.n_triangles + 3 * b}" in text
    assert f"CELL_TYPES {m.n_triangles + b}" in text
    back = read_vtk(path)
    assert np.allclose(back.nodes, m.nodes, rtol=0, atol=1e-15)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.edges, m.edges) and np.array_equal(back.labels, m.labels)


def test_vtk_parseable_by_independent_reader(tmp_path, annulus_010):
    """Token-level parse of the legacy format, independent of read_vtk."""
    m = annulus_010
    tok = write_vtk(m, tmp_path / "m.vtk").read_text().split()
    i = tok.index("POINTS")
    n = int(tok[i + 1])
    pts = np.array(tok[i + 3 : i + 3 + 3 * n], dtype=float).reshape(n, 3)
    j = tok.index("CELLS")
    flat = [int(v) for v in tok[j + 3 : j + 3 + int(tok[j + 2])]]
    cells, pos = [], 0
    while pos < len(flat):
        cells.append(flat[pos + 1 : pos + 1 + flat[pos]])
        pos += flat[pos] + 1
    assert len(cells) == int(tok[j + 1])
    k = tok.index("CELL_TYPES")
    types = np.array(tok[k + 2 : k + 2 + int(tok[k + 1])], dtype=int)
    assert n == m.n_nodes and np.allclose(pts[:, :2], m.nodes)
    tris = np.array([c for c, ty in zip(cells, types) if ty == 5])
    lines = np.array([c for c, ty in zip(cells, types) if ty == 3])
    assert np.array_equal(tris, m.triangles) and np.array_equal(lines, m.edges)


def test_text_format_round_trip(tmp_path, annulus_010):
    m = annulus_010
    path = write_mesh_text(m, tmp_path / "m.txt")
    header = path.read_text().splitlines()[0].split()
    assert list(map(int, header)) == [m.n_nodes, m.n_triangles, len(m.edges)]
    back = read_mesh_text(path)
    assert np.array_equal(back.nodes, m.nodes)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.edges, m.edges) and np.array_equal(back.labels, m.labels)
    assert set(np.unique(back.labels)) == {FIXED, FREE}
