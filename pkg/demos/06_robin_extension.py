"""How the Robin parameter eps controls the velocity extension.

The boundary velocity is extended into the domain by a harmonic field w with
eps dw/dnu + w = g on the moving boundary.  As eps shrinks, w approaches the
harmonic extension that matches g exactly, with a mismatch no larger than
eps times the Dirichlet-to-Neumann norm of g.  The table shows the mismatch
for the radial field g = x / |x| on an annulus, together with that bound.

Zero boundary velocity always gives a zero extension, and the weak curvature
load applied to the coordinate field reproduces the perimeter of the
boundary polygon.
"""

import math

import numpy as np

from comoving import Circle, extend_velocity, generate_annulus_mesh, robin_approximation_error
from comoving.geometry import tangential_divergence_load
from comoving.mesh import FREE


def main():
    mesh = generate_annulus_mesh(Circle(1.0), Circle(0.5), 0.05)
    print(f"{'eps':>9} {'mismatch':>10} {'eps * norm':>11} {'ratio to previous':>18}")
    prev = None
    for eps in [1e-1 / 2**j for j in range(8)]:
        mis, norm = robin_approximation_error(mesh, lambda x: x / np.linalg.norm(x, axis=1)[:, None], eps)
        ratio = "" if prev is None else f"{mis / prev:18.4f}"
        print(f"{eps:9.2e} {mis:10.4e} {eps * norm:11.4e} {ratio}")
        prev = mis

    w = extend_velocity(mesh, np.zeros(len(mesh.boundary_edges(FREE))), 0.1)
    print(f"\nzero normal velocity: max |w| = {np.abs(w).max():g}")
    perimeter = np.sum(tangential_divergence_load(mesh) * mesh.nodes)
    print(f"weak curvature load on x: {perimeter:.8f}, polygon perimeter "
          f"{mesh.edge_lengths(FREE).sum():.8f}, 2 pi = {2 * math.pi:.8f}")


if __name__ == "__main__":
    main()
