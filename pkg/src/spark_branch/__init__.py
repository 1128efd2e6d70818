"""Radial glow-discharge steady states: sparking voltages, nullspaces,
transversality, and global bifurcation branches.

The shell is 1 <= r <= 2 with the anode at r = 1 and the cathode at
r = 2; the applied voltage is the continuation parameter lambda.  The
usual entry points:

* sparking_voltage     -- smallest root of the boundary functional B
* nullspace_triple     -- kernel of the linearization at that root
* transversality_F     -- the bifurcation-direction functional
* trace_branch         -- pseudo-arclength continuation of the branch

plus the `spark-branch` command line on top of them.
"""

from .model import (Parameters, townsend_h, g_fn, harmonic_H, harmonic_dH,
                    in_gamma_region, high_voltage_condition)
from .grid import RadialGrid, weighted_inner, integrate
from .electron import (NoSignChange, SolverFailure, ElectronSolution,
                       SparkingResult, solve_electron, boundary_B,
                       boundary_functional, sparking_voltage, critical_gamma,
                       auxiliary_U)
from .adjoint import (AdjointSolution, NullTriple, solve_adjoint_w,
                      nullspace_triple, nullspace_residual, svd_probe,
                      transversality_F, transversality_crosscheck,
                      adjoint_identity_check)
from .steady import (State, trivial_state, residual, residual_vector,
                     jacobian, newton_solve, admissibility, densities,
                     ion_consistency, NewtonError, AdmissibilityError)
from .continuation import (Branch, BranchPoint, Termination, trace_branch,
                           high_voltage_diagnostic, DEFAULT_LIMITS)

__version__ = "0.1.0"

__all__ = [
    "Parameters", "townsend_h", "g_fn", "harmonic_H", "harmonic_dH",
    "in_gamma_region", "high_voltage_condition",
    "RadialGrid", "weighted_inner", "integrate",
    "NoSignChange", "SolverFailure", "ElectronSolution", "SparkingResult",
    "solve_electron", "boundary_B", "boundary_functional",
    "sparking_voltage", "critical_gamma", "auxiliary_U",
    "AdjointSolution", "NullTriple", "solve_adjoint_w", "nullspace_triple",
    "nullspace_residual", "svd_probe", "transversality_F",
    "transversality_crosscheck", "adjoint_identity_check",
    "State", "trivial_state", "residual", "residual_vector", "jacobian",
    "newton_solve", "admissibility", "densities", "ion_consistency",
    "NewtonError", "AdmissibilityError",
    "Branch", "BranchPoint", "Termination", "trace_branch",
    "high_voltage_diagnostic", "DEFAULT_LIMITS",
    "__version__",
]
