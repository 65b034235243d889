"""Level-set manufactured solutions, error norms and convergence studies.

A :class:`LevelSet` describes a moving domain ``{phi(., t) < 0}`` together
with the exact first and second space derivatives and the time derivative
of ``phi``.  From it we build data for which the exact moving boundary is
known: Hele-Shaw data with exact state ``u = -phi``, and a forcing ``g`` for
which ``V_n = -kappa + g`` is satisfied by the level set motion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import cmm
from .fem import assemble_mass, assemble_stiffness
from .geometry import distance_to_levelset, edge_midpoints, zero_set_samples
from .mesh import FREE, Mesh
from .meshgen import Circle, Curve, Ellipse, PolarCurve, generate_annulus_mesh


class LevelSet:
    """Analytic ``phi(x, t)``; subclasses implement the four evaluators.

    All evaluators take ``x`` of shape ``(n, 2)`` and a scalar ``t``.
    ``grad`` returns ``(n, 2)``, ``hess`` returns ``(n, 2, 2)``.
    """

    anchor = (0.0, 0.0)
    t_start = 0.0
    t_end = 1.0

    def phi(self, x, t):
        raise NotImplementedError

    def grad(self, x, t):
        raise NotImplementedError

    def hess(self, x, t):
        raise NotImplementedError

    def dt(self, x, t):
        raise NotImplementedError

    def laplacian(self, x, t):
        return np.trace(self.hess(x, t), axis1=1, axis2=2)

    def initial_curve(self) -> Curve:
        """The zero set at ``t_start`` as a curve, by ray root finding."""
        c = np.asarray(self.anchor, dtype=float)

        def radius(th, ls=self):
            th = np.atleast_1d(th)
            pts = zero_set_samples_along(ls, ls.t_start, th)
            return np.linalg.norm(pts - c, axis=1)

        return PolarCurve(radius, center=c, name=f"zero set of {self!r}")

    def check(self, points, times):
        """Verify ``|grad phi| != 0`` on the zero set and ``phi < 0`` at ``points``."""
        for t in times:
            z = zero_set_samples(self, t, 512)
            if np.linalg.norm(self.grad(z, t), axis=1).min() <= 0:
                raise ValueError(f"degenerate zero set at t={t}")
            if np.any(self.phi(np.asarray(points, dtype=float), t) >= 0):
                raise ValueError(f"level set is not negative on the fixed region at t={t}")


def zero_set_samples_along(levelset, t, theta):
    """Zero-set points on rays from the anchor at angles ``theta``."""
    c = np.asarray(levelset.anchor, dtype=float)
    d = np.column_stack([np.cos(theta), np.sin(theta)])
    lo = np.zeros(len(theta))
    hi = np.ones(len(theta))
    for _ in range(64):
        pos = levelset.phi(c + hi[:, None] * d, t) > 0
        if pos.all():
            break
        lo = np.where(pos, lo, hi)
        hi = np.where(pos, hi, 2 * hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = levelset.phi(c + mid[:, None] * d, t) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return c + (0.5 * (lo + hi))[:, None] * d


class ExpandingEllipse(LevelSet):
    """``phi = x1^2 / (2 (t+1)) + x2^2 / (t+1) - 1`` on ``t in [0, 1]``."""

    t_end = 1.0

    def phi(self, x, t):
        s = t + 1.0
        return x[:, 0] ** 2 / (2 * s) + x[:, 1] ** 2 / s - 1.0

    def grad(self, x, t):
        s = t + 1.0
        return np.column_stack([x[:, 0] / s, 2 * x[:, 1] / s])

    def hess(self, x, t):
        s = t + 1.0
        H = np.zeros((len(x), 2, 2))
        H[:, 0, 0] = 1.0 / s
        H[:, 1, 1] = 2.0 / s
        return H

    def dt(self, x, t):
        s = t + 1.0
        return -(x[:, 0] ** 2 / (2 * s**2) + x[:, 1] ** 2 / s**2)

    def initial_curve(self):
        return Ellipse(math.sqrt(2 * (self.t_start + 1)), math.sqrt(self.t_start + 1))

    def __repr__(self):
        return "ExpandingEllipse()"


class ShrinkingCircle(LevelSet):
    """``phi = |x|^2 - R(t)^2`` with ``R(t)^2 = r0^2 - rate * t``."""

    def __init__(self, r0=1.0, rate=1.0, t_end=0.5):
        self.r0, self.rate, self.t_end = float(r0), float(rate), float(t_end)
        if self.r0**2 - self.rate * self.t_end <= 0:
            raise ValueError("circle collapses inside the time window")

    def radius(self, t):
        return math.sqrt(self.r0**2 - self.rate * t)

    def phi(self, x, t):
        return np.einsum("ij,ij->i", x, x) - (self.r0**2 - self.rate * t)

    def grad(self, x, t):
        return 2.0 * np.asarray(x, dtype=float)

    def hess(self, x, t):
        return np.broadcast_to(2.0 * np.eye(2), (len(x), 2, 2)).copy()

    def dt(self, x, t):
        return np.full(len(x), self.rate)

    def initial_curve(self):
        return Circle(self.radius(self.t_start))

    def __repr__(self):
        return f"ShrinkingCircle(r0={self.r0}, rate={self.rate})"


class SignedDistanceCircle(LevelSet):
    """Static ``phi = |x| - R``: unit gradient, zero time derivative."""

    def __init__(self, radius=1.0):
        self.R = float(radius)

    def phi(self, x, t):
        return np.linalg.norm(x, axis=1) - self.R

    def grad(self, x, t):
        return x / np.linalg.norm(x, axis=1)[:, None]

    def hess(self, x, t):
        r = np.linalg.norm(x, axis=1)
        n = x / r[:, None]
        return (np.eye(2)[None] - n[:, :, None] * n[:, None, :]) / r[:, None, None]

    def dt(self, x, t):
        return np.zeros(len(x))

    def initial_curve(self):
        return Circle(self.R)

    def __repr__(self):
        return f"SignedDistanceCircle({self.R})"


class TravellingLine(LevelSet):
    """Flat front ``phi = x . n - c t`` moving with normal speed ``c`` (not closed)."""

    def __init__(self, normal=(1.0, 0.0), speed=1.0):
        n = np.asarray(normal, dtype=float)
        self.n = n / np.linalg.norm(n)
        self.c = float(speed)

    def phi(self, x, t):
        return x @ self.n - self.c * t

    def grad(self, x, t):
        return np.broadcast_to(self.n, (len(x), 2)).copy()

    def hess(self, x, t):
        return np.zeros((len(x), 2, 2))

    def dt(self, x, t):
        return np.full(len(x), -self.c)


# -- manufactured data --------------------------------------------------------------


class HeleShawData(NamedTuple):
    f: object
    q_B: object
    gamma: object


def heleshaw_data(ls: LevelSet) -> HeleShawData:
    """Data for which ``u = -phi`` and ``{phi < 0}`` solve the Hele-Shaw problem.

    ``f = lap phi``, ``q_B = -grad phi . nu`` and
    ``gamma = (-phi_t / |grad phi|^2 - 1) grad phi``.  The last choice makes
    ``(-grad u + gamma) . nu`` equal to the level-set normal velocity
    ``-phi_t / |grad phi|`` on the zero set (with ``lam = 0``, ``alpha = 1``).
    """

    def f(x, t):
        return ls.laplacian(x, t)

    def q_B(x, t, normal):
        return -np.einsum("ij,ij->i", ls.grad(x, t), normal)

    def gamma(x, t):
        g = ls.grad(x, t)
        factor = -ls.dt(x, t) / np.einsum("ij,ij->i", g, g) - 1.0
        return factor[:, None] * g

    return HeleShawData(f, q_B, gamma)


def mcf_forcing(ls: LevelSet):
    """``g`` such that the zero set of ``phi`` moves by ``V_n = -kappa + g``.

    ``g = -phi_t/|grad phi| + lap phi/|grad phi| - ((D^2 phi) grad phi) . grad phi / |grad phi|^3``.
    """

    def g(x, t):
        gr = ls.grad(x, t)
        norm = np.linalg.norm(gr, axis=1)
        hgg = np.einsum("ij,ijk,ik->i", gr, ls.hess(x, t), gr)
        return -ls.dt(x, t) / norm + ls.laplacian(x, t) / norm - hgg / norm**3

    return g


def level_set_normal_velocity(ls: LevelSet, x, t):
    """``-phi_t / |grad phi|``, the outward normal speed of the zero set."""
    return -ls.dt(x, t) / np.linalg.norm(ls.grad(x, t), axis=1)


def level_set_curvature(ls: LevelSet, x, t):
    """``div(grad phi / |grad phi|)``, positive for convex domains."""
    gr = ls.grad(x, t)
    norm = np.linalg.norm(gr, axis=1)
    hgg = np.einsum("ij,ijk,ik->i", gr, ls.hess(x, t), gr)
    return ls.laplacian(x, t) / norm - hgg / norm**3


# -- errors -------------------------------------------------------------------------


def boundary_error(mesh: Mesh, ls: LevelSet, t: float, samples=None, midpoints: bool = True) -> float:
    """Largest distance of FREE nodes to the zero set at ``t``.

    With ``midpoints`` the FREE edge midpoints are measured too, which
    also catches the chord error of the polygon between nodes.
    """
    pts = mesh.nodes[mesh.free_nodes]
    if midpoints:
        pts = np.concatenate([pts, edge_midpoints(mesh, FREE)])
    return float(np.max(distance_to_levelset(pts, ls, t, samples=samples)))


def err_gamma(trajectory, ls: LevelSet, tau: float, midpoints: bool = True) -> float:
    """``max_k max_{x in Gamma_h^k} dist(x, Gamma(k tau))`` over a list of meshes."""
    return max(boundary_error(m, ls, k * tau, midpoints=midpoints) for k, m in enumerate(trajectory))


def err_field(mesh: Mesh, u_h, ls: LevelSet, t: float, norm: str = "L2") -> float:
    """Distance between ``u_h`` and the nodal interpolant of ``u = -phi(., t)``.

    ``norm`` is ``"L2"`` or ``"H1"`` (full norm: L2 part plus seminorm),
    both integrated exactly for the P1 difference field.
    """
    d = np.asarray(u_h, dtype=float) + ls.phi(mesh.nodes, t)
    l2 = float(d @ (assemble_mass(mesh) @ d))
    if norm == "L2":
        return math.sqrt(max(l2, 0.0))
    if norm == "H1":
        semi = float(d @ (assemble_stiffness(mesh) @ d))
        return math.sqrt(max(l2 + semi, 0.0))
    raise ValueError("norm must be 'L2' or 'H1'")


# -- convergence studies -------------------------------------------------------------


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``; NaN below three points."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def presaturation_slope(eps, err, min_ratio=1.5) -> float:
    """Slope of ``log err`` vs ``log eps`` over the leading unsaturated points.

    Points are taken from the largest ``eps`` downwards while the local slope
    between consecutive points stays above ``1 / min_ratio``; the first
    flatter segment marks the onset of saturation.
    """
    eps, err = np.asarray(eps, dtype=float), np.asarray(err, dtype=float)
    order = np.argsort(eps)[::-1]
    eps, err = eps[order], err[order]
    keep = 1
    for i in range(1, len(eps)):
        local = math.log(err[i - 1] / err[i]) / math.log(eps[i - 1] / eps[i])
        if not local > 1.0 / min_ratio:
            break
        keep += 1
    return fit_slope(eps[:keep], err[:keep])


@dataclass(frozen=True)
class Scenario:
    """A manufactured moving boundary problem ready for convergence studies."""

    name: str
    levelset: LevelSet
    inner: Curve
    flow: cmm.FlowSpec
    T: float
    track_state: bool
    boundary_layer: bool = False

    def mesh(self, h: float) -> Mesh:
        return generate_annulus_mesh(
            self.levelset.initial_curve(), self.inner, h, boundary_layer=self.boundary_layer
        )


def heleshaw_scenario() -> Scenario:
    ls = ExpandingEllipse()
    data = heleshaw_data(ls)
    flow = cmm.FlowSpec.hele_shaw(f=data.f, q_B=data.q_B, gamma=data.gamma, lam=0.0, alpha=1)
    # the boundary flux drives the motion, so the mesh gets a regular layer of
    # triangles along the free boundary
    return Scenario("heleshaw", ls, Circle(0.5), flow, T=1.0, track_state=True, boundary_layer=True)


def mcf_scenario() -> Scenario:
    ls = ShrinkingCircle(r0=1.0, rate=1.0, t_end=0.5)
    flow = cmm.FlowSpec.mcf(g=mcf_forcing(ls))
    return Scenario("mcf", ls, Circle(0.25), flow, T=0.5, track_state=False)


SCENARIOS = {"heleshaw": heleshaw_scenario, "mcf": mcf_scenario}


@dataclass
class EocRow:
    tau: float
    h: float
    eps: float
    err_gamma: float = float("nan")
    err_l2: float = float("nan")
    err_h1: float = float("nan")
    status: str = "OK"
    steps: int = 0


@dataclass
class EocReport:
    scenario: str
    rows: list = field(default_factory=list)

    ERRORS = ("err_gamma", "err_l2", "err_h1")

    def ok_rows(self):
        return [r for r in self.rows if r.status == "OK"]

    def slopes(self):
        """Fitted slopes keyed by ``("tau", eps)`` and ``("eps", tau)``."""
        out = {}
        rows = self.ok_rows()
        for eps in sorted({r.eps for r in rows}):
            sel = [r for r in rows if r.eps == eps]
            if len({r.tau for r in sel}) >= 3:
                out[("tau", eps)] = {
                    e: fit_slope([r.tau for r in sel], [getattr(r, e) for r in sel]) for e in self.ERRORS
                }
        for tau in sorted({r.tau for r in rows}):
            sel = [r for r in rows if r.tau == tau]
            if len({r.eps for r in sel}) >= 3:
                out[("eps", tau)] = {
                    e: fit_slope([r.eps for r in sel], [getattr(r, e) for r in sel]) for e in self.ERRORS
                }
        return out

    def summary_lines(self):
        """One line per error listing every fitted slope."""
        slopes = self.slopes()
        lines = []
        for e in self.ERRORS:
            if not any(np.isfinite(getattr(r, e)) for r in self.ok_rows()):
                continue  # not tracked by this scenario
            parts = []
            for (kind, value), sl in slopes.items():
                other = "eps" if kind == "tau" else "tau"
                parts.append(f"vs {kind} ({other}={value:g}) {sl[e]:.3f}")
            lines.append(f"{e}: " + ("; ".join(parts) if parts else "no fit (fewer than 3 points)"))
        return lines

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "h", "eps", "err_gamma", "err_l2", "err_h1", "status"])
            for r in self.rows:
                w.writerow([repr(r.tau), repr(r.h), repr(r.eps), repr(r.err_gamma), repr(r.err_l2), repr(r.err_h1), r.status])
        return path


def run_case(scenario: Scenario, tau: float, h: float, eps: float, method=None) -> EocRow:
    """One simulation of ``scenario``; errors are maximized over all steps.

    Instability (inverted elements) yields status ``ABORTED``; a mesh that
    cannot be generated at width ``h`` yields ``UNMESHABLE``.
    """
    row = EocRow(tau=tau, h=h, eps=eps)
    try:
        mesh = scenario.mesh(h)
    except ValueError:
        row.status = "UNMESHABLE"
        return row
    n_steps = int(round(scenario.T / tau))
    ls = scenario.levelset
    acc = {"gamma": 0.0, "l2": 0.0, "h1": 0.0}
    seen = set()

    def observe(state):
        if state.k not in seen:
            seen.add(state.k)
            acc["gamma"] = max(acc["gamma"], boundary_error(state.mesh, ls, state.k * tau))
        if scenario.track_state and state.u is not None:
            t = state.t if state.previous_mesh is state.mesh else state.t - tau
            acc["l2"] = max(acc["l2"], err_field(state.previous_mesh, state.u, ls, t, "L2"))
            acc["h1"] = max(acc["h1"], err_field(state.previous_mesh, state.u, ls, t, "H1"))

    try:
        cmm.simulate(mesh, scenario.flow, eps, tau, n_steps, observer=observe, method=method)
    except cmm.InvertedElementError as exc:
        row.status = "ABORTED"
        row.steps = exc.step
        return row
    row.steps = n_steps
    row.err_gamma = acc["gamma"]
    if scenario.track_state:
        row.err_l2, row.err_h1 = acc["l2"], acc["h1"]
    return row


def run_eoc(scenario, grid, method=None, progress=None) -> EocReport:
    """Run ``scenario`` (a :class:`Scenario` or its name) for every ``(tau, h, eps)``."""
    if isinstance(scenario, str):
        scenario = SCENARIOS[scenario]()
    report = EocReport(scenario.name)
    for tau, h, eps in grid:
        row = run_case(scenario, tau, h, eps, method=method)
        report.rows.append(row)
        if progress is not None:
            progress(row)
    return report
