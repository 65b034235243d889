"""Comoving mesh method for moving boundary problems on 2D annular domains."""

from .cmm import (
    FlowKind,
    FlowSpec,
    InvertedElementError,
    SimulationState,
    StepRecord,
    extend_velocity,
    extend_velocity_mcf,
    normal_velocity,
    robin_approximation_error,
    shape_energy,
    simulate,
    stationarity_residual,
    step,
)
from .fem import SolverError, solve_state
from .mesh import FIXED, FREE, Mesh, MeshError, QualityReport, mesh_quality, move_mesh
from .meshgen import Circle, Ellipse, PolarCurve, Polygon, RoundedRectangle, generate_annulus_mesh, l_shape

__version__ = "0.1.0"

__all__ = [
    "FlowKind",
    "FlowSpec",
    "InvertedElementError",
    "SimulationState",
    "StepRecord",
    "extend_velocity",
    "extend_velocity_mcf",
    "normal_velocity",
    "robin_approximation_error",
    "shape_energy",
    "simulate",
    "stationarity_residual",
    "step",
    "SolverError",
    "solve_state",
    "FIXED",
    "FREE",
    "Mesh",
    "MeshError",
    "QualityReport",
    "mesh_quality",
    "move_mesh",
    "Circle",
    "Ellipse",
    "PolarCurve",
    "Polygon",
    "RoundedRectangle",
    "generate_annulus_mesh",
    "l_shape",
]
