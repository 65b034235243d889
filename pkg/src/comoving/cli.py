"""Command line driver: scenario runs, convergence studies and file output.

Usage::

    cmm run <scenario> [--config FILE] [--out DIR] [--eps X] [--tau X] [--T X] [--h X]
    cmm eoc <scenario> [--hfactor N] [--eps LIST] [--out DIR]

Configuration files are flat ``key = value`` lines; ``#`` starts a comment.
Recognized keys are the fields of :class:`SimulationConfig`.  Curves are
written as a selector followed by its constants, for example
``outer = ellipse 1.4142135623730951 1`` or ``inner = lshape 0.25``.  The
Bernoulli scenario takes several initial curves separated by ``;``.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import cmm, manufactured
from .geometry import boundary_loop, hausdorff_distance
from .mesh import FREE, Mesh, write_vtk
from .meshgen import Circle, Ellipse, PolarCurve, RoundedRectangle, generate_annulus_mesh, l_shape

SCENARIOS = ("heleshaw-classic", "heleshaw-eoc", "bernoulli", "mcf", "mcf-eoc")
EOC_SCENARIOS = ("heleshaw", "mcf")


class ConfigError(ValueError):
    pass


# -- curves ---------------------------------------------------------------------


def _star(amplitude=2.0, mode=5):
    return PolarCurve(lambda th: amplitude / (amplitude - np.cos(mode * th)), name=f"star {amplitude:g} {mode:g}")


CURVES = {
    "circle": (Circle, 1),
    "ellipse": (Ellipse, 2),
    "rounded_rectangle": (RoundedRectangle, 3),
    "lshape": (l_shape, 1),
    "star": (_star, 2),
}


def parse_curve(text: str):
    """``"circle 0.5"`` -> ``Circle(0.5)``; constants may be omitted for ``lshape`` and ``star``."""
    words = text.split()
    if not words or words[0] not in CURVES:
        raise ConfigError(f"unknown curve {text!r}; expected one of {sorted(CURVES)}")
    factory, n = CURVES[words[0]]
    try:
        args = [float(w) for w in words[1:]]
    except ValueError:
        raise ConfigError(f"curve constants must be numbers in {text!r}") from None
    if len(args) > n or (len(args) < n and words[0] not in ("lshape", "star")):
        raise ConfigError(f"curve {words[0]!r} takes {n} constant(s), got {len(args)}")
    try:
        return factory(*args)
    except ValueError as exc:
        raise ConfigError(f"invalid curve {text!r}: {exc}") from None


# -- configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a ``run`` needs; ``outer`` may hold several ``;``-separated curves."""

    scenario: str
    eps: float
    tau: float
    T: float
    h: float
    alpha: int = 1
    lam: float = 0.0
    q_B: float = 1.0
    outer: str = ""
    inner: str = ""
    out: str = ""
    stride: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        for name in ("eps", "tau", "T", "h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if self.T < self.tau:
            raise ConfigError(f"T={self.T} must not be smaller than tau={self.tau}")
        if self.alpha not in (0, 1):
            raise ConfigError("alpha must be 0 or 1")
        if self.stride < 0:
            raise ConfigError("stride must be non-negative")
        if self.scenario in ("heleshaw-classic", "bernoulli", "mcf"):
            if not self.outer.strip() or not self.inner.strip():
                raise ConfigError(f"scenario {self.scenario!r} needs outer and inner curves")
        if self.scenario == "bernoulli" and not self.lam < 0:
            raise ConfigError("the bernoulli scenario needs lam < 0")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.tau)))

    @property
    def snapshot_stride(self) -> int:
        return self.stride if self.stride > 0 else max(1, self.n_steps // 20)

    def outer_curves(self):
        return [parse_curve(part) for part in self.outer.split(";") if part.strip()]

    def inner_curve(self):
        return parse_curve(self.inner)


DEFAULTS = {
    "heleshaw-classic": dict(
        eps=0.1, tau=0.1, T=2.0, h=0.1, alpha=1, lam=0.0, q_B=1.0,
        outer=f"ellipse {math.sqrt(2)!r} 1", inner="circle 0.5",
    ),
    "heleshaw-eoc": dict(eps=1e-4, tau=0.05, T=1.0, h=0.05),
    "bernoulli": dict(
        eps=0.1, tau=1e-3, T=1.0, h=0.025, alpha=0, lam=-10.0, q_B=1.0,
        outer="circle 0.6; rounded_rectangle 1.2 1.2 0.2; rounded_rectangle 1.6 1.0 0.2",
        inner="lshape 0.25",
    ),
    "mcf": dict(eps=0.1, tau=5e-4, T=1.0, h=0.2, outer="star 2 5", inner="circle 0.5"),
    "mcf-eoc": dict(eps=1e-2, tau=1 / 1600, T=0.5, h=0.125),
}

_TYPES = {f.name: f.type for f in fields(SimulationConfig)}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` text into a dict of typed values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, lineno)
    return out


def _convert(key, value, lineno=None):
    kind = _TYPES[key]
    where = f"line {lineno}: " if lineno else ""
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
    except ValueError:
        raise ConfigError(f"{where}{key} expects a number, got {value!r}") from None
    return value


def build_config(scenario: str, config_file=None, **overrides) -> SimulationConfig:
    """Scenario defaults, then the config file, then command line overrides."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    values = dict(DEFAULTS[scenario])
    if config_file is not None:
        try:
            text = Path(config_file).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        parsed = parse_config_text(text)
        if parsed.get("scenario", scenario) != scenario:
            raise ConfigError(f"config file is for scenario {parsed['scenario']!r}, not {scenario!r}")
        values.update(parsed)
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["scenario"] = scenario
    values.setdefault("out", str(Path("out") / scenario))
    if not values["out"]:
        values["out"] = str(Path("out") / scenario)
    return SimulationConfig(**values)


# -- output -------------------------------------------------------------------------


class RunWriter:
    """Streams snapshots, diagnostics and boundary trajectories of one run."""

    def __init__(self, out: Path, stride: int, n_steps: int):
        self.out, self.stride, self.n_steps = out, stride, n_steps
        self.diag = (out / "diagnostics.csv").open("w", newline="")
        self.diag.write(",".join(cmm.StepRecord.CSV_COLUMNS) + "\n")
        self.traj = (out / "trajectory.csv").open("w", newline="")
        self.traj_writer = csv.writer(self.traj)
        self.traj_writer.writerow(["k", "node_id", "x", "y"])
        self.written = 0

    def _snapshot(self, k: int, mesh: Mesh, u=None, w=None):
        data = {}
        if u is not None:
            data["u"] = u
        if w is not None:
            data["w"] = w
        write_vtk(mesh, self.out / f"mesh_{k:06d}.vtk", point_data=data or None)

    def __call__(self, state: cmm.SimulationState):
        records = state.diagnostics
        final = state.previous_mesh is state.mesh
        if state.previous_mesh is not None:
            # fields of step k - 1 (or of the final mesh after finalize) are now known
            k = state.k if final else state.k - 1
            mesh = state.previous_mesh
            for rec in records[self.written:]:
                self.diag.write(rec.csv_row() + "\n")
            self.written = len(records)
            if k % self.stride == 0 or k == self.n_steps:
                self._snapshot(k, mesh, state.u, None if final else state.w)
        if not final:
            free = state.mesh.free_nodes
            for j, (x, y) in zip(free.tolist(), state.mesh.nodes[free].tolist()):
                self.traj_writer.writerow([state.k, j, repr(x), repr(y)])

    def abort(self, state: cmm.SimulationState):
        """Flush pending records and snapshot the last valid mesh."""
        for rec in state.diagnostics[self.written:]:
            self.diag.write(rec.csv_row() + "\n")
        self._snapshot(state.k, state.mesh)

    def close(self):
        self.diag.close()
        self.traj.close()


def _flow_for(config: SimulationConfig):
    if config.scenario == "heleshaw-classic":
        return cmm.FlowSpec.hele_shaw(q_B=config.q_B, lam=config.lam, alpha=config.alpha)
    if config.scenario == "bernoulli":
        return cmm.FlowSpec.bernoulli(lam=config.lam, q_B=config.q_B)
    if config.scenario == "mcf":
        return cmm.FlowSpec.mcf()
    raise AssertionError(config.scenario)


def _prepare_out(out: Path):
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None


def _simulate_to(out: Path, mesh: Mesh, flow, config: SimulationConfig, log, extra=None):
    """Run one simulation with file output; returns the final state or ``None`` on abort."""
    _prepare_out(out)
    writer = RunWriter(out, config.snapshot_stride, config.n_steps)

    def observe(state):
        writer(state)
        if extra is not None:
            extra(state)

    try:
        state = cmm.simulate(mesh, flow, config.eps, config.tau, config.n_steps, observer=observe)
    except cmm.InvertedElementError as exc:
        writer.abort(exc.state)
        log(f"aborted: {exc}")
        return None
    finally:
        writer.close()
    return state


def _mesh_for(outer, inner, h, boundary_layer=False):
    try:
        return generate_annulus_mesh(outer, inner, h, boundary_layer=boundary_layer)
    except ValueError as exc:
        raise ConfigError(f"invalid geometry: {exc}") from None


def _run_manufactured(config: SimulationConfig, log) -> int:
    sc = manufactured.SCENARIOS[config.scenario.split("-")[0]]()
    ls = sc.levelset
    mesh = _mesh_for(ls.initial_curve(), sc.inner, config.h, sc.boundary_layer)
    if config.T > ls.t_end + 1e-12:
        raise ConfigError(f"T={config.T} exceeds the manufactured solution's time window {ls.t_end}")
    flow = sc.flow
    worst = {"err_gamma": 0.0}
    seen = set()

    def track(state):
        if state.k not in seen:
            seen.add(state.k)
            err = manufactured.boundary_error(state.mesh, ls, state.t)
            worst["err_gamma"] = max(worst["err_gamma"], err)

    out = Path(config.out)
    state = _simulate_to(out, mesh, flow, config, log, extra=track)
    if state is None:
        return 2
    (out / "error.txt").write_text(f"err_gamma = {worst['err_gamma']!r}\n")
    log(f"{out}: {config.n_steps} steps, err_gamma = {worst['err_gamma']:.6g}")
    return 0


def run(config: SimulationConfig, log=print) -> int:
    """Execute a scenario; returns the process exit status (2 on an inverted-element abort)."""
    if config.scenario in ("heleshaw-eoc", "mcf-eoc"):
        return _run_manufactured(config, log)
    out = Path(config.out)
    flow = _flow_for(config)
    inner = config.inner_curve()
    outers = config.outer_curves()
    meshes = [_mesh_for(outer, inner, config.h) for outer in outers]
    status = 0
    finals = []
    for i, mesh in enumerate(meshes, 1):
        sub = out / f"shape_{i}" if len(meshes) > 1 else out
        state = _simulate_to(sub, mesh, flow, config, log)
        if state is None:
            status = 2
            continue
        d = state.diagnostics
        if flow.has_state:
            log(
                f"{sub}: {config.n_steps} steps, area {d[0].area:.6g} -> {d[-1].area:.6g}, "
                f"residual {d[0].stationarity_residual:.6g} -> {d[-1].stationarity_residual:.6g}"
            )
        else:
            log(
                f"{sub}: {config.n_steps} steps, area {d[0].area:.6g} -> {d[-1].area:.6g}, "
                f"length {d[0].boundary_length:.6g} -> {d[-1].boundary_length:.6g}"
            )
        finals.append((i, state.mesh.nodes[boundary_loop(state.mesh, FREE)]))
    if len(finals) > 1:
        with (out / "hausdorff.csv").open("w", newline="") as fh:
            fh.write("shape_a,shape_b,hausdorff\n")
            for a in range(len(finals)):
                for b in range(a + 1, len(finals)):
                    (i, pa), (j, pb) = finals[a], finals[b]
                    dist = hausdorff_distance(pa, pb)
                    fh.write(f"{i},{j},{dist!r}\n")
                    log(f"hausdorff(shape_{i}, shape_{j}) = {dist:.6g}")
    return status


# -- convergence studies ----------------------------------------------------------------


def eoc_grid(scenario: str, hfactor=None, eps_list=None):
    """``(tau, h, eps)`` triples of the two convergence studies.

    Hele-Shaw: ``tau in {0.1, 0.05, 0.025, 0.0125}``, ``h = hfactor * tau``
    (default 1), ``eps`` default ``1e-4``.  Mean curvature flow:
    ``tau = 1 / (200 * 2**m)`` for ``m = 0..4``, ``h = hfactor * tau``
    (default 200), ``eps`` default ``{1e-1, 1e-2, 1e-3}``.
    """
    if scenario == "heleshaw":
        hf = 1.0 if hfactor is None else float(hfactor)
        taus = [0.1, 0.05, 0.025, 0.0125]
        eps_list = [1e-4] if eps_list is None else eps_list
    elif scenario == "mcf":
        hf = 200.0 if hfactor is None else float(hfactor)
        taus = [1.0 / (200 * 2**m) for m in range(5)]
        eps_list = [1e-1, 1e-2, 1e-3] if eps_list is None else eps_list
    else:
        raise ConfigError(f"unknown EOC scenario {scenario!r}; expected one of {EOC_SCENARIOS}")
    if not hf > 0 or any(not e > 0 for e in eps_list):
        raise ConfigError("hfactor and every eps must be positive")
    return [(tau, hf * tau, eps) for tau in taus for eps in eps_list]


def run_eoc(scenario: str, out, hfactor=None, eps_list=None, log=print) -> manufactured.EocReport:
    grid = eoc_grid(scenario, hfactor, eps_list)
    out = Path(out)
    _prepare_out(out)

    def progress(row):
        err = "-" if row.status != "OK" else f"{row.err_gamma:.4g}"
        log(f"tau={row.tau:g} h={row.h:g} eps={row.eps:g}: {row.status} err_gamma={err}")

    report = manufactured.run_eoc(scenario, grid, progress=progress)
    report.write_csv(out / "eoc.csv")
    lines = report.summary_lines()
    (out / "eoc_summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        log(line)
    return report


# -- entry point ----------------------------------------------------------------------


def _eps_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmm", description="Comoving mesh method simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scenario and write VTK/CSV output")
    p_run.add_argument("scenario", choices=SCENARIOS)
    p_run.add_argument("--config", help="flat key = value configuration file")
    p_run.add_argument("--out", help="output directory (default out/<scenario>)")
    p_run.add_argument("--eps", type=float)
    p_run.add_argument("--tau", type=float)
    p_run.add_argument("--T", type=float)
    p_run.add_argument("--h", type=float)
    p_eoc = sub.add_parser("eoc", help="run a convergence study and write eoc.csv")
    p_eoc.add_argument("scenario", choices=EOC_SCENARIOS)
    p_eoc.add_argument("--hfactor", type=float, help="mesh width as a multiple of tau")
    p_eoc.add_argument("--eps", type=_eps_list, help="comma separated eps values")
    p_eoc.add_argument("--out", help="output directory (default out/eoc-<scenario>)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg):
        print(msg, flush=True)

    try:
        if args.command == "run":
            config = build_config(
                args.scenario, args.config, out=args.out, eps=args.eps, tau=args.tau, T=args.T, h=args.h
            )
            return run(config, log)
        out = args.out or str(Path("out") / f"eoc-{args.scenario}")
        run_eoc(args.scenario, out, args.hfactor, args.eps, log)
        return 0
    except ConfigError as exc:
        print(f"cmm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
