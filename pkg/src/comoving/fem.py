"""P1 finite element assembly and linear solves on a :class:`~comoving.mesh.Mesh`.

Scalar fields are ``(N_p,)`` arrays of nodal values and vector fields are
``(N_p, 2)`` arrays.  Every integral assembled here has a polynomial
integrand of degree at most two under P1 fields, and is computed exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import FIXED, FREE, Mesh

DEFAULT_METHOD = "cg"
RTOL = 1e-10


class SolverError(RuntimeError):
    """Linear solve failed; ``residual`` holds the final relative residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


# -- element geometry -----------------------------------------------------------


def basis_gradients(mesh: Mesh):
    """Gradients of the three hat functions on every triangle.

    Returns
    -------
    grads : (N_e, 3, 2) array
        ``grads[l, j]`` is the constant gradient of the hat function of local
        vertex ``j`` on triangle ``l``.
    areas : (N_e,) array
        Signed triangle areas.
    """
    p = mesh.nodes[mesh.triangles]
    areas = mesh.signed_areas
    # grad lambda_j = rot(x_{j+2} - x_{j+1}) / (2A), rot(a, b) = (-b, a) rotated
    grads = np.empty((len(p), 3, 2))
    for j in range(3):
        e = p[:, (j + 2) % 3] - p[:, (j + 1) % 3]
        grads[:, j, 0] = -e[:, 1]
        grads[:, j, 1] = e[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def field_gradients(mesh: Mesh, u) -> np.ndarray:
    """Piecewise constant gradient of a P1 field.

    A scalar field gives an ``(N_e, 2)`` array; a vector field gives
    ``(N_e, 2, 2)`` with ``out[l, c, k] = d u_c / d x_k``.
    """
    grads, _ = basis_gradients(mesh)
    u = np.asarray(u, dtype=float)
    ul = u[mesh.triangles]
    if u.ndim == 1:
        return np.einsum("lj,ljk->lk", ul, grads)
    return np.einsum("ljc,ljk->lck", ul, grads)


# -- assembly -------------------------------------------------------------------


def _scatter(mesh: Mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(mesh: Mesh, components: int = 1) -> sp.csr_matrix:
    """Matrix of ``int grad u : grad v dx``.

    For ``components=2`` the result is the block diagonal of two scalar
    stiffness matrices, with dofs ordered component by component
    (all x-components first).
    """
    grads, areas = basis_gradients(mesh)
    local = np.einsum("lik,ljk->lij", grads, grads) * np.abs(areas)[:, None, None]
    K = _scatter(mesh, local)
    K = ((K + K.T) * 0.5).tocsr()
    if components == 1:
        return K
    if components == 2:
        return sp.block_diag([K, K], format="csr")
    raise ValueError("components must be 1 or 2")


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix ``int u v dx``."""
    a = np.abs(mesh.signed_areas)
    local = (np.ones((3, 3)) + np.eye(3))[None] * (a / 12.0)[:, None, None]
    M = _scatter(mesh, local)
    return ((M + M.T) * 0.5).tocsr()


def assemble_boundary_mass(mesh: Mesh, label: int = FREE) -> sp.csr_matrix:
    """Matrix of ``int_{edges with label} u v ds``; per edge ``(L/6) [[2, 1], [1, 2]]``."""
    e = mesh.boundary_edges(label)
    L = mesh.edge_lengths(label)
    rows = np.concatenate([e[:, 0], e[:, 0], e[:, 1], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    vals = np.concatenate([L / 3, L / 6, L / 6, L / 3])
    n = mesh.n_nodes
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_p0_boundary_load(mesh: Mesh, values, label: int = FREE) -> np.ndarray:
    """Load vector of ``int_{edges with label} e . phi ds`` for piecewise constant ``e``.

    ``values`` holds one number or one 2-vector per labelled edge; an edge
    of length ``L`` contributes ``(L/2) * value`` to each of its endpoints.
    """
    e = mesh.boundary_edges(label)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(e):
        raise ValueError(f"expected {len(e)} edge values, got {values.shape[0]}")
    contrib = 0.5 * mesh.edge_lengths(label).reshape((-1,) + (1,) * (values.ndim - 1)) * values
    out = np.zeros((mesh.n_nodes,) + values.shape[1:])
    np.add.at(out, e[:, 0], contrib)
    np.add.at(out, e[:, 1], contrib)
    return out


def assemble_edge_p1_load(mesh: Mesh, endpoint_values, label: int) -> np.ndarray:
    """Load of data that is linear along each edge but may jump between edges.

    ``endpoint_values[i] = (q(a), q(b))`` for edge ``i = (a, b)``.
    """
    e = mesh.boundary_edges(label)
    q = np.asarray(endpoint_values, dtype=float)
    L = mesh.edge_lengths(label)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, e[:, 0], L / 6 * (2 * q[:, 0] + q[:, 1]))
    np.add.at(out, e[:, 1], L / 6 * (q[:, 0] + 2 * q[:, 1]))
    return out


def edge_unit_normals(mesh: Mesh, label: int) -> np.ndarray:
    """Outward unit normals ``(t2, -t1) / |t|`` of the labelled edges."""
    e = mesh.boundary_edges(label)
    t = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    return np.column_stack([t[:, 1], -t[:, 0]]) / np.linalg.norm(t, axis=1)[:, None]


def nodal_normals(mesh: Mesh, label: int) -> np.ndarray:
    """Length-weighted average of adjacent edge normals, normalized.

    Returns an ``(N_p, 2)`` array that is zero away from the labelled edges.
    """
    e = mesh.boundary_edges(label)
    t = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    out = np.zeros_like(mesh.nodes)
    np.add.at(out, e[:, 0], n)
    np.add.at(out, e[:, 1], n)
    norm = np.linalg.norm(out, axis=1)
    nz = norm > 0
    out[nz] /= norm[nz, None]
    return out


# -- linear algebra -------------------------------------------------------------


@dataclass
class LinearSystem:
    """``matrix @ x = rhs`` subject to ``x[constrained_dofs] = constrained_values``.

    ``rhs`` may carry several columns; each is solved with the same
    constraints (``constrained_values`` then has matching columns).
    """

    matrix: sp.spmatrix
    rhs: np.ndarray
    constrained_dofs: np.ndarray = None
    constrained_values: np.ndarray = None

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.constrained_dofs is None:
            self.constrained_dofs = np.zeros(0, dtype=np.int64)
        self.constrained_dofs = np.asarray(self.constrained_dofs, dtype=np.int64)
        vals = 0.0 if self.constrained_values is None else self.constrained_values
        shape = (len(self.constrained_dofs),) + self.rhs.shape[1:]
        self.constrained_values = np.broadcast_to(np.asarray(vals, dtype=float), shape).copy()


def pcg(A, b, rtol=RTOL, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Returns ``(x, iterations)``.  Converged when the recursively updated
    residual satisfies ``|r| <= rtol |b|``.
    """
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0 and x0 is None:
        return x, 0
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, k
        z = dinv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {maxiter} iterations",
        residual=float(np.linalg.norm(r) / bnorm),
    )


def solve_linear(system: LinearSystem, method: str | None = None, rtol: float = RTOL) -> np.ndarray:
    """Solve a constrained symmetric positive definite system.

    Constraints are eliminated symmetrically: constrained columns move to
    the right-hand side and the reduced matrix keeps its SPD structure.
    Constrained components of the result equal the prescribed values exactly.

    Parameters
    ----------
    method : {"cg", "direct", "dense"}, optional
        ``"cg"`` (Jacobi PCG, the default), ``"direct"`` (sparse LU) or
        ``"dense"`` (LAPACK Cholesky, intended as a test oracle on small systems).
        When CG hits its iteration cap, which happens on meshes with nearly
        degenerate triangles, the system is re-solved by sparse LU.
    """
    method = DEFAULT_METHOD if method is None else method
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    con = system.constrained_dofs
    free = np.setdiff1d(np.arange(n), con)
    x = np.zeros(b.shape)
    x[con] = system.constrained_values
    Aff = A[free][:, free].tocsr()
    bf = b[free] - A[free][:, con] @ system.constrained_values
    cols = bf.reshape(len(free), -1)
    out = np.empty_like(cols)
    if method == "cg":
        try:
            for c in range(cols.shape[1]):
                out[:, c], _ = pcg(Aff, cols[:, c], rtol=rtol)
        except SolverError:
            out = spla.splu(Aff.tocsc()).solve(cols)
    elif method == "direct":
        lu = spla.splu(Aff.tocsc())
        out = lu.solve(cols)
    elif method == "dense":
        try:
            out = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Aff.toarray()), cols)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"reduced matrix is not positive definite: {exc}") from None
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(out)):
        raise SolverError("solution is not finite; the reduced system is singular")
    x[free] = out.reshape(bf.shape)
    return x


# -- data evaluation ------------------------------------------------------------


def _eval_field(f, x, t):
    if callable(f):
        return np.broadcast_to(np.asarray(f(x, t), dtype=float), (len(x),))
    return np.full(len(x), float(f))


def _eval_boundary(q, x, t, normal):
    if callable(q):
        return np.broadcast_to(np.asarray(q(x, t, normal), dtype=float), (len(x),))
    return np.full(len(x), float(q))


def solve_state(mesh: Mesh, f=0.0, q_B=0.0, alpha: int = 1, t: float = 0.0, method=None) -> np.ndarray:
    """P1 solution of ``-lap u = f`` with ``u = 0`` on the FREE boundary.

    On the FIXED boundary ``alpha=1`` imposes the flux ``grad u . nu = q_B``
    weakly and ``alpha=0`` imposes ``u = q_B`` at the FIXED nodes.

    Parameters
    ----------
    f : float or callable ``f(x, t)``
        Source, interpolated at the nodes.
    q_B : float or callable ``q_B(x, t, normal)``
        Boundary data.  For ``alpha=1`` it is evaluated at both endpoints of
        every FIXED edge with that edge's outward normal and integrated
        exactly as a per-edge linear function; for ``alpha=0`` it is
        evaluated at the FIXED nodes with averaged nodal normals.
    """
    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    K = assemble_stiffness(mesh)
    rhs = np.zeros(mesh.n_nodes)
    fv = _eval_field(f, mesh.nodes, t)
    if np.any(fv != 0.0):
        rhs += assemble_mass(mesh) @ fv
    free_nodes = mesh.free_nodes
    if alpha == 1:
        e = mesh.boundary_edges(FIXED)
        nrm = edge_unit_normals(mesh, FIXED)
        qa = _eval_boundary(q_B, mesh.nodes[e[:, 0]], t, nrm)
        qb = _eval_boundary(q_B, mesh.nodes[e[:, 1]], t, nrm)
        rhs += assemble_edge_p1_load(mesh, np.column_stack([qa, qb]), FIXED)
        con, vals = free_nodes, np.zeros(len(free_nodes))
    else:
        fixed = mesh.fixed_nodes
        qv = _eval_boundary(q_B, mesh.nodes[fixed], t, nodal_normals(mesh, FIXED)[fixed])
        con = np.concatenate([free_nodes, fixed])
        vals = np.concatenate([np.zeros(len(free_nodes)), qv])
    return solve_linear(LinearSystem(K, rhs, con, vals), method=method)
