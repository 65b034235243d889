"""The state problem on an annulus, checked against its closed-form solution.

Between the circles r = 0.5 and r = 1 the harmonic function with zero trace on
the outer circle and unit flux out of the inner circle is u = -ln(r) / 2.  The
P1 solution should approach it at second order in L2, and its flux through the
outer circle should be close to 1/2.
"""

import numpy as np

from comoving import Circle, generate_annulus_mesh, solve_state
from comoving.fem import assemble_mass, field_gradients
from comoving.geometry import edge_normals
from comoving.mesh import FREE


def main():
    print(f"{'h':>7} {'nodes':>6} {'interp. L2 error':>17} {'mean outer flux':>16}")
    prev = None
    for h in (0.1, 0.05, 0.025):
        mesh = generate_annulus_mesh(Circle(1.0), Circle(0.5), h)
        u = solve_state(mesh, f=0.0, q_B=1.0, alpha=1)
        exact = -0.5 * np.log(np.linalg.norm(mesh.nodes, axis=1))
        e = u - exact
        err = float(np.sqrt(e @ (assemble_mass(mesh) @ e)))

        # the gradient of the triangle behind each outer edge gives the flux
        grads = field_gradients(mesh, u)[mesh.edge_triangle[mesh.edge_indices(FREE)]]
        flux = -np.einsum("ek,ek->e", grads, edge_normals(mesh, FREE))
        L = mesh.edge_lengths(FREE)
        rate = "" if prev is None else f"   rate {np.log2(prev / err):.2f}"
        print(f"{h:7.3f} {mesh.n_nodes:6d} {err:17.3e} {np.sum(L * flux) / L.sum():16.5f}{rate}")
        prev = err


if __name__ == "__main__":
    main()
