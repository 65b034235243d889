"""Shape optimisation with the Bernoulli descent flow.

The free boundary moves with V = (grad u . nu - lam) nu, where u solves a
Dirichlet problem with u = 1 on the fixed inner boundary and u = 0 outside.
The flow decreases the energy J = int (|grad u|^2 + lam^2) and stops when the
boundary flux equals lam everywhere, which is the Bernoulli free boundary
condition.

For a circular fixed boundary of radius r0 the stationary shape is the circle
of radius R with R ln(R / r0) = -1 / lam.  Starting from a slightly larger
circle the flow contracts toward it while the residual decays.
"""

import math

from scipy.optimize import brentq

from comoving import Circle, FlowSpec, InvertedElementError, generate_annulus_mesh, simulate
from comoving.geometry import enclosed_area


def main(lam=-4.0, r0=0.25, steps=300, tau=2e-3):
    R = brentq(lambda R: R * math.log(R / r0) + 1 / lam, r0 * 1.0001, 10.0)
    print(f"lam = {lam}: stationary radius {R:.5f}")
    mesh = generate_annulus_mesh(Circle(R + 0.15), Circle(r0), 0.04)
    flow = FlowSpec.bernoulli(lam=lam, q_B=1.0)

    def observe(state):
        if state.k % 50 or not state.diagnostics or state.previous_mesh is state.mesh:
            return
        d = state.diagnostics[-1]
        radius = math.sqrt(enclosed_area(state.mesh) / math.pi)
        print(f"  k={state.k:4d} equivalent radius {radius:.5f} residual {d.stationarity_residual:.4f} "
              f"energy {d.energy:.5f}")

    try:
        state = simulate(mesh, flow, eps=0.1, tau=tau, n_steps=steps, observer=observe)
    except InvertedElementError as exc:
        print(f"inverted element at step {exc.step}: {exc.report}")
        state = exc.state
    d = state.diagnostics
    print(f"residual {d[0].stationarity_residual:.4f} -> {d[-1].stationarity_residual:.4f}")
    print(f"final equivalent radius {math.sqrt(enclosed_area(state.mesh) / math.pi):.5f} (target {R:.5f})")


if __name__ == "__main__":
    main()
