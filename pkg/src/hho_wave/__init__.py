"""Hybrid nonconforming discretization of the first-order acoustic wave system.

Cell + face polynomial unknowns on triangle meshes, gradient reconstruction,
stabilized coupling (equal- and mixed-order variants), static condensation of
the algebraic face unknowns, explicit RK4 / implicit midpoint time marching,
and a manufactured-solution convergence harness.
"""

from .basis_quad import BasisWorkspace, build_workspaces, n_poly
from .errors import (
    ConvergenceReport,
    ConvergenceRow,
    ManufacturedProblem,
    compute_eoc,
    energy_error,
    stabilization_seminorm,
    standing_wave,
    superconvergent_error,
)
from .h_interp import HInterpolant, h_interpolate, h_interpolate_global, h_interpolate_hdgplus
from .local_ops import LocalOperatorPack, build_pack, build_packs, stability_equivalence_check
from .mesh import SimplicialMesh, build_structured, refine_uniform
from .semidisc import HybridField, SkeletonSolver, WaveOperator, assemble
from .timeint import MidpointStepper, RunResult, TimeLoopConfig, choose_dt, rk4_step, run

__version__ = "0.1.0"

__all__ = [
    "BasisWorkspace",
    "ConvergenceReport",
    "ConvergenceRow",
    "HInterpolant",
    "HybridField",
    "LocalOperatorPack",
    "ManufacturedProblem",
    "MidpointStepper",
    "RunResult",
    "SimplicialMesh",
    "SkeletonSolver",
    "TimeLoopConfig",
    "WaveOperator",
    "assemble",
    "build_pack",
    "build_packs",
    "build_structured",
    "build_workspaces",
    "choose_dt",
    "compute_eoc",
    "energy_error",
    "h_interpolate",
    "h_interpolate_global",
    "h_interpolate_hdgplus",
    "n_poly",
    "refine_uniform",
    "rk4_step",
    "run",
    "stability_equivalence_check",
    "stabilization_seminorm",
    "standing_wave",
    "superconvergent_error",
    "__version__",
]
