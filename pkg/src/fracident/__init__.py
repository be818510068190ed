"""Identification of the order and horizon of a truncated fractional Laplacian.

The package assembles finite element stiffness matrices of the kernel
``|x - y|^{-1-2s}`` truncated at distance ``delta`` on uniform 1D
meshes, interpolates them in ``s`` with piecewise Chebyshev
polynomials, and recovers ``(s, delta)`` from data by BFGS with adjoint
gradients.
"""

__version__ = "0.1.0"

from .assembly import (  # noqa: E402
    ParamPoint,
    QuadratureConfig,
    StiffnessMatrix,
    assemble_correction,
    assemble_delta_derivative,
    assemble_infinite,
    assemble_s_derivative,
    assemble_s_derivative_correction,
    assemble_truncated_direct,
)
from .cheb import ChebSchedule, build_schedule, lagrange_deriv, lagrange_eval, optimize_xi  # noqa: E402
from .control import IdentifyRun, Regularizer, bfgs_identify, cost, gradient  # noqa: E402
from .mesh_fem import Mesh1D, build_mesh, energy_norm, l2_error, load_vector, mass_matrix  # noqa: E402
from .opfamily import OperatorFamily, evaluate, evaluate_ddelta, evaluate_ds, precompute  # noqa: E402
from .solve import SolveReport, solve_adjoint, solve_state  # noqa: E402

__all__ = [
    "ParamPoint", "QuadratureConfig", "StiffnessMatrix", "assemble_correction",
    "assemble_delta_derivative", "assemble_infinite", "assemble_s_derivative",
    "assemble_s_derivative_correction", "assemble_truncated_direct", "ChebSchedule",
    "build_schedule", "lagrange_deriv", "lagrange_eval", "optimize_xi", "IdentifyRun",
    "Regularizer", "bfgs_identify", "cost", "gradient", "Mesh1D", "build_mesh",
    "energy_norm", "l2_error", "load_vector", "mass_matrix", "OperatorFamily", "evaluate",
    "evaluate_ddelta", "evaluate_ds", "precompute", "SolveReport", "solve_adjoint", "solve_state",
]
