"""The comoving mesh method.

Each time step solves the state problem (Hele-Shaw and Bernoulli flows),
evaluates the piecewise constant normal velocity on the free boundary,
extends ``V_n nu`` into the whole annulus by a vector Laplace problem with a
Robin condition on the free boundary, and finally moves every node by
``tau * w``.  The mesh is generated once and never regenerated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import fem
from .fem import LinearSystem, assemble_boundary_mass, assemble_p0_boundary_load, assemble_stiffness
from .geometry import boundary_length, edge_midpoints, edge_normals, enclosed_area, tangential_divergence_load
from .mesh import FREE, Mesh, QualityReport, mesh_quality, move_mesh


class FlowKind(enum.Enum):
    HELE_SHAW = "hele-shaw"
    BERNOULLI = "bernoulli"
    MCF = "mcf"
    MCF_FORCED = "mcf-forced"


class InvertedElementError(RuntimeError):
    """A mesh update produced a triangle with non-positive signed area.

    ``step`` is the index of the first invalid mesh, ``report`` its quality
    and ``state`` the last valid :class:`SimulationState`.
    """

    def __init__(self, step: int, report: QualityReport, state=None):
        super().__init__(f"inverted element at step {step}: {report}")
        self.step = step
        self.report = report
        self.state = state


@dataclass(frozen=True)
class FlowSpec:
    """Data of the moving boundary problem.

    ``f(x, t)``, ``q_B(x, t, normal)``, ``gamma(x, t)`` and ``g(x, t)`` may be
    callables or constants (``gamma=None`` means zero).  ``lam`` is the
    constant added to the normal velocity and ``alpha`` selects a flux
    (1) or Dirichlet (0) condition on the fixed boundary.
    """

    kind: FlowKind
    f: object = 0.0
    q_B: object = 0.0
    gamma: object = None
    lam: float = 0.0
    alpha: int = 1
    g: object = None

    def __post_init__(self):
        if not isinstance(self.kind, FlowKind):
            raise TypeError("kind must be a FlowKind")
        if self.alpha not in (0, 1):
            raise ValueError("alpha must be 0 or 1")
        if self.kind is FlowKind.MCF_FORCED and self.g is None:
            raise ValueError("MCF_FORCED requires a forcing g")
        if self.kind is FlowKind.BERNOULLI and not self.lam < 0:
            raise ValueError("the Bernoulli flow needs lam < 0")

    @property
    def has_state(self) -> bool:
        return self.kind in (FlowKind.HELE_SHAW, FlowKind.BERNOULLI)

    @classmethod
    def hele_shaw(cls, f=0.0, q_B=1.0, gamma=None, lam=0.0, alpha=1):
        return cls(FlowKind.HELE_SHAW, f=f, q_B=q_B, gamma=gamma, lam=lam, alpha=alpha)

    @classmethod
    def bernoulli(cls, lam=-10.0, q_B=1.0, f=0.0):
        return cls(FlowKind.BERNOULLI, f=f, q_B=q_B, lam=lam, alpha=0)

    @classmethod
    def mcf(cls, g=None):
        if g is None:
            return cls(FlowKind.MCF)
        return cls(FlowKind.MCF_FORCED, g=g)


@dataclass(frozen=True)
class StepRecord:
    k: int
    t: float
    area: float
    boundary_length: float
    min_angle: float
    min_area: float
    stationarity_residual: float
    energy: float

    CSV_COLUMNS = ("k", "t", "area", "boundary_length", "min_angle", "min_area", "stationarity_residual")

    def csv_row(self) -> str:
        return ",".join(
            [str(self.k)] + [repr(float(getattr(self, c))) for c in self.CSV_COLUMNS[1:]]
        )


@dataclass
class SimulationState:
    """Mesh at step ``k`` plus the fields computed on the previous mesh.

    ``u`` and ``w`` are the last state solve and velocity extension, both
    living on ``previous_mesh``.
    """

    k: int
    t: float
    mesh: Mesh
    u: np.ndarray | None = None
    w: np.ndarray | None = None
    previous_mesh: Mesh | None = None
    diagnostics: list = field(default_factory=list)


# -- velocity ---------------------------------------------------------------------


def _edge_gradients(mesh: Mesh, u) -> np.ndarray:
    tri = mesh.edge_triangle[mesh.edge_indices(FREE)]
    return fem.field_gradients(mesh, u)[tri]


def normal_velocity(mesh: Mesh, u, gamma=None, lam: float = 0.0, t: float = 0.0) -> np.ndarray:
    """``V = (-grad u + gamma) . nu + lam`` on every FREE edge (piecewise constant).

    ``grad u`` is the gradient on the triangle adjacent to the edge and
    ``gamma`` is sampled at the edge midpoint.
    """
    nu = edge_normals(mesh, FREE)
    v = -_edge_gradients(mesh, u)
    if gamma is not None:
        if callable(gamma):
            v = v + np.asarray(gamma(edge_midpoints(mesh, FREE), t), dtype=float)
        else:
            v = v + np.asarray(gamma, dtype=float)
    return np.einsum("ij,ij->i", v, nu) + lam


def _robin_extension(mesh: Mesh, load, eps: float, method=None) -> np.ndarray:
    # K w + (1/eps) M_Gamma w = (1/eps) load, w = 0 on the fixed boundary
    if not eps > 0:
        raise ValueError("eps must be positive")
    A = assemble_stiffness(mesh) + assemble_boundary_mass(mesh, FREE) / eps
    fixed = mesh.fixed_nodes
    system = LinearSystem(A, np.asarray(load) / eps, fixed, np.zeros((len(fixed), 2)))
    return fem.solve_linear(system, method=method)


def extend_velocity(mesh: Mesh, vn, eps: float, method=None) -> np.ndarray:
    """Robin-regularized extension of ``V_n nu`` to a P1 vector field.

    Solves ``-lap w = 0``, ``w = 0`` on the FIXED boundary and
    ``eps dw/dnu + w = V_n nu`` on the FREE boundary, with the piecewise
    constant data integrated exactly edge by edge.
    """
    vn = np.asarray(vn, dtype=float)
    nu = edge_normals(mesh, FREE)
    load = assemble_p0_boundary_load(mesh, vn[:, None] * nu, FREE)
    return _robin_extension(mesh, load, eps, method)


def extend_velocity_mcf(mesh: Mesh, eps: float, g=None, t: float = 0.0, method=None) -> np.ndarray:
    """Velocity extension for ``V_n = -kappa (+ g)``.

    The curvature enters only weakly through
    ``-int div_Gamma phi ds``; the optional forcing ``g(x, t)`` is sampled at
    FREE edge midpoints and integrated as ``g nu``.
    """
    load = -tangential_divergence_load(mesh)
    if g is not None:
        nu = edge_normals(mesh, FREE)
        gv = g(edge_midpoints(mesh, FREE), t) if callable(g) else np.full(len(nu), float(g))
        load = load + assemble_p0_boundary_load(mesh, np.asarray(gv)[:, None] * nu, FREE)
    return _robin_extension(mesh, load, eps, method)


# -- diagnostics ------------------------------------------------------------------


def stationarity_residual(mesh: Mesh, u, lam: float) -> float:
    """``|| grad u . nu - lam ||`` in L2 of the FREE boundary (piecewise constant)."""
    nu = edge_normals(mesh, FREE)
    flux = np.einsum("ij,ij->i", _edge_gradients(mesh, u), nu)
    return float(np.sqrt(np.sum(mesh.edge_lengths(FREE) * (flux - lam) ** 2)))


def shape_energy(mesh: Mesh, u, lam: float) -> float:
    """``int (|grad u|^2 + lam^2) dx`` over the annular mesh."""
    u = np.asarray(u, dtype=float)
    return float(u @ (assemble_stiffness(mesh) @ u) + lam**2 * mesh.area)


def robin_approximation_error(mesh: Mesh, g, eps: float, method=None):
    """Compare the Robin approximation of Dirichlet data with the data itself.

    ``g`` is a callable ``g(x)`` returning 2-vectors, or an ``(N_p, 2)`` array,
    whose P1 trace on the FREE boundary is used.  Returns
    ``(||v_eps - g||, ||Lambda g||)`` in L2 of the FREE boundary, where
    ``v_eps`` solves the Robin problem with data ``g`` and ``Lambda g`` is
    the normal derivative (adjacent-triangle gradient) of the harmonic
    extension of ``g`` vanishing on the FIXED boundary.
    """
    free, fixed = mesh.free_nodes, mesh.fixed_nodes
    if callable(g):
        gn = np.zeros_like(mesh.nodes)
        gn[free] = np.asarray(g(mesh.nodes[free]), dtype=float)
    else:
        gn = np.zeros_like(mesh.nodes)
        gn[free] = np.asarray(g, dtype=float)[free]
    K = assemble_stiffness(mesh)
    con = np.concatenate([free, fixed])
    vals = np.concatenate([gn[free], np.zeros((len(fixed), 2))])
    v = fem.solve_linear(LinearSystem(K, np.zeros_like(gn), con, vals), method=method)
    nu = edge_normals(mesh, FREE)
    lam_g = np.einsum("eck,ek->ec", _edge_gradients(mesh, v), nu)
    L = mesh.edge_lengths(FREE)
    neumann_norm = float(np.sqrt(np.sum(L[:, None] * lam_g**2)))

    MG = assemble_boundary_mass(mesh, FREE)
    v_eps = _robin_extension(mesh, MG @ gn, eps, method)
    d = v_eps - gn
    mismatch = float(np.sqrt(max(0.0, np.sum(d * (MG @ d)))))
    return mismatch, neumann_norm


def _record(mesh: Mesh, k: int, t: float, u, spec: FlowSpec) -> StepRecord:
    q = mesh_quality(mesh)
    if u is None:
        res, energy = float("nan"), float("nan")
    else:
        res, energy = stationarity_residual(mesh, u, spec.lam), shape_energy(mesh, u, spec.lam)
    return StepRecord(
        k=k,
        t=t,
        area=enclosed_area(mesh, FREE),
        boundary_length=boundary_length(mesh, FREE),
        min_angle=q.min_angle,
        min_area=q.min_signed_area,
        stationarity_residual=res,
        energy=energy,
    )


# -- time stepping ----------------------------------------------------------------


def _solve_state(mesh, spec, t, method):
    return fem.solve_state(mesh, spec.f, spec.q_B, spec.alpha, t, method=method)


def step(state: SimulationState, spec: FlowSpec, eps: float, tau: float, method=None) -> SimulationState:
    """Advance one explicit Euler step of the comoving mesh method.

    Raises
    ------
    InvertedElementError
        If the moved mesh contains a triangle with non-positive area.
    """
    mesh, t = state.mesh, state.t
    if spec.has_state:
        u = _solve_state(mesh, spec, t, method)
        vn = normal_velocity(mesh, u, spec.gamma, spec.lam, t)
        w = extend_velocity(mesh, vn, eps, method=method)
    else:
        u = None
        w = extend_velocity_mcf(mesh, eps, spec.g, t, method=method)
    record = _record(mesh, state.k, t, u, spec)
    moved = move_mesh(mesh, w, tau)
    if not moved.is_valid:
        raise InvertedElementError(state.k + 1, mesh_quality(moved), state)
    return SimulationState(
        k=state.k + 1,
        t=(state.k + 1) * tau,
        mesh=moved,
        u=u,
        w=w,
        previous_mesh=mesh,
        diagnostics=state.diagnostics + [record],
    )


def finalize(state: SimulationState, spec: FlowSpec, method=None) -> SimulationState:
    """Solve the state on the current mesh and append its diagnostic record."""
    u = _solve_state(state.mesh, spec, state.t, method) if spec.has_state else None
    record = _record(state.mesh, state.k, state.t, u, spec)
    return replace(state, u=u, w=None, previous_mesh=state.mesh, diagnostics=state.diagnostics + [record])


def simulate(mesh: Mesh, spec: FlowSpec, eps: float, tau: float, n_steps: int, observer=None, method=None):
    """Run ``n_steps`` steps from ``mesh`` and finalize.

    ``observer(state)`` is called on the initial state, after every step
    and on the finalized state.  Returns the finalized state; an
    :class:`InvertedElementError` propagates unchanged.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    state = SimulationState(k=0, t=0.0, mesh=mesh)
    if observer is not None:
        observer(state)
    for _ in range(n_steps):
        state = step(state, spec, eps, tau, method=method)
        if observer is not None:
            observer(state)
    state = finalize(state, spec, method=method)
    if observer is not None:
        observer(state)
    return state
