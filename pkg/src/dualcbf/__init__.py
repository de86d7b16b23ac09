"""Dielectric scattering with PMCHWT, dual characteristic basis functions and a Calderon preconditioner."""

from .cbfm import CbfGenerationConfig, CbfSet, build_cbf_set, build_reduced, solve_baseline_mom, solve_cbfm
from .emcore import Medium, PlaneWave, direction_grid, green, plane_wave_fields, quadrature_rule
from .errors import DualCbfError
from .krylov import LinearOperator, SolveReport, gmres, lu_factor_solve
from .mesh import TriangleMesh, build_rwg, generate_geometry, load_mesh, partition_cells
from .postprocess import RcsPattern, SweepSpec, far_field, mie_rcs, monostatic_rcs, rmse
from .scene import Scene

__version__ = "0.1.0"

__all__ = [
    "CbfGenerationConfig", "CbfSet", "build_cbf_set", "build_reduced", "solve_baseline_mom", "solve_cbfm",
    "Medium", "PlaneWave", "direction_grid", "green", "plane_wave_fields", "quadrature_rule",
    "DualCbfError",
    "LinearOperator", "SolveReport", "gmres", "lu_factor_solve",
    "TriangleMesh", "build_rwg", "generate_geometry", "load_mesh", "partition_cells",
    "RcsPattern", "SweepSpec", "far_field", "mie_rcs", "monostatic_rcs", "rmse",
    "Scene",
]
