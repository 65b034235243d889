import math

import numpy as np
import pytest
from helpers import polygon_annulus, unit_square_mesh

from comoving import Circle, Ellipse, generate_annulus_mesh
from comoving.cmm import (
    FlowKind,
    FlowSpec,
    InvertedElementError,
    SimulationState,
    StepRecord,
    extend_velocity,
    extend_velocity_mcf,
    finalize,
    normal_velocity,
    robin_approximation_error,
    shape_energy,
    simulate,
    stationarity_residual,
    step,
)
from comoving.fem import (
    assemble_boundary_mass,
    assemble_p0_boundary_load,
    assemble_stiffness,
    solve_state,
)
from comoving.geometry import edge_midpoints, edge_normals, enclosed_area
from comoving.manufactured import SignedDistanceCircle, mcf_forcing
from comoving.mesh import FIXED, FREE, Mesh

EDGE = Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [(0, 1), (1, 2), (2, 0)], [FREE, FIXED, FIXED])


def radial_part(mesh, w):
    x = mesh.nodes[mesh.free_nodes]
    return np.einsum("ij,ij->i", w[mesh.free_nodes], x / np.linalg.norm(x, axis=1)[:, None])


# -- FlowSpec -----------------------------------------------------------------------


def test_flowspec_factories():
    assert FlowSpec.hele_shaw().kind is FlowKind.HELE_SHAW
    b = FlowSpec.bernoulli()
    assert b.kind is FlowKind.BERNOULLI and b.alpha == 0 and b.lam == -10
    assert FlowSpec.mcf().kind is FlowKind.MCF
    assert FlowSpec.mcf(g=1.0).kind is FlowKind.MCF_FORCED
    assert FlowSpec.hele_shaw().has_state and not FlowSpec.mcf().has_state


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind=FlowKind.MCF_FORCED),
        dict(kind=FlowKind.BERNOULLI, lam=1.0),
        dict(kind=FlowKind.HELE_SHAW, alpha=2),
    ],
)
def test_flowspec_rejects_inconsistent_fields(kwargs):
    with pytest.raises(ValueError):
        FlowSpec(**kwargs)


def test_flowspec_kind_type_checked():
    with pytest.raises(TypeError):
        FlowSpec("mcf")


# -- normal velocity ----------------------------------------------------------------


def test_annulus_flux_velocity(annulus_005):
    # oracle: -grad u . nu = 1/2 on r = 1 for u = -ln(r)/2
    u = solve_state(annulus_005, q_B=1.0)
    v = normal_velocity(annulus_005, u)
    assert np.abs(v - 0.5).max() < 0.05


def test_velocity_of_zero_state_is_lambda(annulus_010):
    v = normal_velocity(annulus_010, np.zeros(annulus_010.n_nodes), lam=-10.0)
    assert np.all(v == -10.0)


def test_orthogonal_gamma_gives_zero_velocity():
    m = unit_square_mesh(2)
    v = normal_velocity(m, np.zeros(m.n_nodes), gamma=lambda x, t: np.tile((1.0, 0.0), (len(x), 1)))
    mid = edge_midpoints(m)
    assert np.allclose(v[np.isclose(mid[:, 1], 1.0)], 0.0)
    assert np.allclose(v[np.isclose(mid[:, 0], 1.0)], 1.0)
    assert np.allclose(normal_velocity(m, np.zeros(m.n_nodes), gamma=(1.0, 0.0)), v)


def test_gamma_sampled_at_midpoints_and_time():
    seen = {}

    def gamma(x, t):
        seen["x"], seen["t"] = x.copy(), t
        return np.zeros_like(x)

    normal_velocity(EDGE, np.zeros(3), gamma=gamma, t=0.7)
    assert np.allclose(seen["x"], [[0.5, 0.0]]) and seen["t"] == 0.7


# -- velocity extension --------------------------------------------------------------


def test_zero_velocity_gives_zero_extension(annulus_010):
    w = extend_velocity(annulus_010, np.zeros(len(annulus_010.boundary_edges(FREE))), 0.1)
    assert np.abs(w).max() <= 1e-8


def test_extension_vanishes_on_fixed(annulus_010):
    m = annulus_010
    vn = np.random.default_rng(0).normal(size=len(m.boundary_edges(FREE)))
    w = extend_velocity(m, vn, 0.05)
    assert np.all(w[m.fixed_nodes] == 0.0)


def test_extension_solves_discrete_robin_system(annulus_010):
    m = annulus_010
    eps = 0.05
    vn = np.cos(3 * np.arctan2(*edge_midpoints(m).T[::-1]))
    w = extend_velocity(m, vn, eps)
    A = assemble_stiffness(m) + assemble_boundary_mass(m, FREE) / eps
    load = assemble_p0_boundary_load(m, vn[:, None] * edge_normals(m), FREE) / eps
    res = A @ w - load
    interior = np.setdiff1d(np.arange(m.n_nodes), m.fixed_nodes)
    assert np.abs(res[interior]).max() <= 1e-8 * np.abs(load).max()


def test_constant_velocity_extension_is_radial(annulus_010):
    m = annulus_010
    w = extend_velocity(m, np.full(len(m.boundary_edges(FREE)), 0.7), 0.1)
    r = np.linalg.norm(m.nodes, axis=1)
    er = m.nodes / r[:, None]
    tangential = w[:, 0] * -er[:, 1] + w[:, 1] * er[:, 0]
    assert np.abs(tangential).max() < 0.1 * 0.7
    # oracle: (A r + B / r) e_r with a(1/2) = 0 and Robin at r = 1
    radial = np.einsum("ij,ij->i", w, er)
    exact = 0.7 / (1 + 5 * 0.1 / 3) * (4 * r / 3 - 1 / (3 * r))
    assert np.abs(radial - exact).max() < 0.1 * 0.7


def test_boundary_mismatch_decreases_with_eps(annulus_010):
    m = annulus_010
    vn = 1.0 + 0.3 * np.sin(2 * np.arctan2(*edge_midpoints(m).T[::-1]))
    nu = edge_normals(m)
    e = m.boundary_edges(FREE)
    L = m.edge_lengths(FREE)
    out = []
    for eps in (1e-1, 1e-2, 1e-3):
        w = extend_velocity(m, vn, eps)
        wn = np.einsum("ij,ij->i", 0.5 * (w[e[:, 0]] + w[e[:, 1]]), nu)
        out.append(np.sqrt(np.sum(L * (wn - vn) ** 2)))
    assert out[0] > out[1] > out[2]


def test_extension_linear_in_velocity(annulus_010):
    m = annulus_010
    vn = np.random.default_rng(4).normal(size=len(m.boundary_edges(FREE)))
    a = extend_velocity(m, vn, 0.1, method="direct")
    b = extend_velocity(m, 2.5 * vn, 0.1, method="direct")
    assert np.allclose(b, 2.5 * a, atol=1e-12)


def test_extension_requires_positive_eps(annulus_010):
    with pytest.raises(ValueError):
        extend_velocity(annulus_010, np.zeros(len(annulus_010.boundary_edges(FREE))), 0.0)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_mcf_extension_on_circle(annulus_005, eps):
    # oracle: kappa = 1 and the radial Robin solution gives w . nu = -1 / (1 + 5 eps / 3)
    wr = radial_part(annulus_005, extend_velocity_mcf(annulus_005, eps))
    assert wr.mean() == pytest.approx(-1 / (1 + 5 * eps / 3), abs=0.05**2 + 1e-3)
    assert wr.max() - wr.min() < 1e-3


def test_mcf_forcing_balances_static_circle(annulus_005):
    g = mcf_forcing(SignedDistanceCircle(1.0))
    w = extend_velocity_mcf(annulus_005, 1e-2, g=g)
    assert np.abs(w).max() < 1e-10


def test_mcf_constant_forcing(annulus_005):
    base = extend_velocity_mcf(annulus_005, 1e-2)
    forced = extend_velocity_mcf(annulus_005, 1e-2, g=2.0)
    shift = radial_part(annulus_005, forced - base)
    assert shift.mean() == pytest.approx(2 / (1 + 5e-2 / 3), rel=1e-2)


# -- diagnostics -------------------------------------------------------------------


def test_stationarity_residual_single_edge():
    # EDGE has nu = (0, -1), so u = c y gives grad u . nu = -c
    u = np.array([0.0, 0.0, 3.0])
    assert stationarity_residual(EDGE, u, -3.0) == pytest.approx(0.0, abs=1e-15)
    assert stationarity_residual(EDGE, u, -5.0) == pytest.approx(2.0)


def test_shape_energy_linear_field():
    m = unit_square_mesh(3)
    assert shape_energy(m, m.nodes[:, 0], -2.0) == pytest.approx(1.0 + 4.0)


def test_robin_error_zero_data(annulus_010):
    assert robin_approximation_error(annulus_010, lambda x: np.zeros_like(x), 0.1) == (0.0, 0.0)


def test_robin_error_radial_data(annulus_010):
    m = annulus_010
    out = [robin_approximation_error(m, lambda x: x / np.linalg.norm(x, axis=1)[:, None], eps) for eps in (1e-1, 1e-2)]
    # oracle: |Lambda g| = (5/3) sqrt(2 pi)
    assert out[0][1] == pytest.approx(5 / 3 * math.sqrt(2 * math.pi), rel=0.05)
    assert out[0][0] <= 1.25 * 0.1 * out[0][1]
    assert out[1][0] < out[0][0]


def test_robin_error_accepts_nodal_array(annulus_010):
    m = annulus_010
    g = m.nodes / np.linalg.norm(m.nodes, axis=1)[:, None]
    a = robin_approximation_error(m, g, 0.1)
    b = robin_approximation_error(m, lambda x: x / np.linalg.norm(x, axis=1)[:, None], 0.1)
    assert a == pytest.approx(b)


def test_step_record_csv_row():
    rec = StepRecord(3, 0.25, 1.5, 2.0, 0.5, 1e-3, float("nan"), 0.0)
    cells = rec.csv_row().split(",")
    assert len(cells) == len(StepRecord.CSV_COLUMNS)
    assert cells[0] == "3" and float(cells[1]) == 0.25 and cells[-1] == "nan"


# -- stepping ------------------------------------------------------------------------


def test_zero_data_leaves_mesh_unchanged(annulus_010):
    s = step(SimulationState(0, 0.0, annulus_010), FlowSpec.hele_shaw(q_B=0.0), 0.1, 0.1)
    assert np.array_equal(s.mesh.nodes, annulus_010.nodes)
    assert s.k == 1 and s.t == pytest.approx(0.1)


def test_step_moves_by_tau_w(annulus_010):
    s = step(SimulationState(0, 0.0, annulus_010), FlowSpec.hele_shaw(), 0.1, 0.05)
    assert np.allclose(s.mesh.nodes, annulus_010.nodes + 0.05 * s.w)
    assert s.previous_mesh is annulus_010
    assert len(s.diagnostics) == 1 and s.diagnostics[0].k == 0


def test_step_is_deterministic(annulus_010):
    spec = FlowSpec.hele_shaw()
    a = step(SimulationState(0, 0.0, annulus_010), spec, 0.1, 0.1)
    b = step(SimulationState(0, 0.0, annulus_010), spec, 0.1, 0.1)
    assert np.array_equal(a.mesh.nodes, b.mesh.nodes)


def test_classic_hele_shaw_area_grows():
    m = generate_annulus_mesh(Ellipse(math.sqrt(2), 1.0), Circle(0.5), 0.1)
    areas = []
    simulate(m, FlowSpec.hele_shaw(), 0.1, 0.1, 5, observer=lambda s: areas.append(enclosed_area(s.mesh)))
    assert np.all(np.diff(areas[:-1]) > 0)


def test_inverted_element_aborts(annulus_010):
    s0 = SimulationState(0, 0.0, annulus_010)
    with pytest.raises(InvertedElementError) as info:
        # the outer circle is pushed inward past the fixed circle
        step(s0, FlowSpec.hele_shaw(q_B=0.0, lam=-20.0), 0.1, 0.1)
    err = info.value
    assert err.step == 1 and err.state is s0
    assert err.report.min_signed_area <= 0


def test_simulate_observer_and_finalize(annulus_010):
    seen = []
    out = simulate(annulus_010, FlowSpec.hele_shaw(), 0.1, 0.05, 3, observer=seen.append)
    assert [s.k for s in seen] == [0, 1, 2, 3, 3]
    assert out.previous_mesh is out.mesh and out.w is None
    assert [r.k for r in out.diagnostics] == [0, 1, 2, 3]
    assert np.isfinite(out.diagnostics[-1].stationarity_residual)


def test_simulate_rejects_nonpositive_tau(annulus_010):
    with pytest.raises(ValueError):
        simulate(annulus_010, FlowSpec.hele_shaw(), 0.1, 0.0, 1)


def test_mcf_has_no_state(annulus_010):
    s = step(SimulationState(0, 0.0, annulus_010), FlowSpec.mcf(), 0.1, 1e-3)
    assert s.u is None
    assert math.isnan(s.diagnostics[0].stationarity_residual)
    assert np.isnan(finalize(s, FlowSpec.mcf()).diagnostics[-1].energy)


def test_mcf_circle_radius():
    # curve shortening of a circle: R^2 = 1 - 2 t
    m = generate_annulus_mesh(Circle(1.0), Circle(0.25), 0.05)
    tau, n = 2.5e-4, 400
    s = simulate(m, FlowSpec.mcf(), 1e-2, tau, n)
    r = np.linalg.norm(s.mesh.nodes[s.mesh.free_nodes], axis=1)
    assert np.abs(r - math.sqrt(1 - 2 * tau * n)).max() < 0.01


def test_bernoulli_near_stationary_circle(annulus_005):
    # oracle: u = ln(r) / ln(1/2) is stationary on r = 1 for lam = 1 / ln(1/2)
    m = annulus_005
    lam = 1 / math.log(0.5)
    spec = FlowSpec.bernoulli(lam=lam)
    s = step(SimulationState(0, 0.0, m), spec, 0.1, 1e-3)
    res = s.diagnostics[0].stationarity_residual
    assert res < 0.02 * abs(lam) * math.sqrt(2 * math.pi) * 5
    vn = normal_velocity(m, s.u, None, lam)
    assert np.abs(s.w).max() <= np.abs(vn).max()
    assert np.abs(s.mesh.nodes - m.nodes).max() <= 1e-3 * np.abs(vn).max()


def test_polygon_annulus_step_runs():
    s = step(SimulationState(0, 0.0, polygon_annulus()), FlowSpec.hele_shaw(), 0.1, 0.01)
    assert s.mesh.is_valid
