"""Curve shortening flow of a five-pointed star.

Mean curvature flow needs no state problem: the curvature enters only
through the weak identity int kappa nu . phi = int div_Gamma phi, which is
assembled edge by edge without ever estimating kappa at a node.  The star
r = 2 / (2 - cos 5 theta) loses its arms first; the isoperimetric ratio
L^2 / (4 pi A) falls toward 1 as the curve rounds off.
"""

import math

import numpy as np

from comoving import Circle, FlowSpec, PolarCurve, generate_annulus_mesh, simulate
from comoving.geometry import boundary_length, enclosed_area


def main(tau=5e-4, steps=2000):
    star = PolarCurve(lambda th: 2.0 / (2.0 - np.cos(5 * th)), name="star")
    mesh = generate_annulus_mesh(star, Circle(0.5), 0.2)
    print(f"{'k':>5} {'length':>8} {'area':>8} {'L^2/(4 pi A)':>13}")

    def observe(state):
        if state.k % 200 or (state.k and state.previous_mesh is state.mesh):
            return
        L, A = boundary_length(state.mesh), enclosed_area(state.mesh)
        print(f"{state.k:5d} {L:8.4f} {A:8.4f} {L * L / (4 * math.pi * A):13.5f}")

    simulate(mesh, FlowSpec.mcf(), eps=0.1, tau=tau, n_steps=steps, observer=observe)


if __name__ == "__main__":
    main()
