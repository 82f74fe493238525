"""Derivative-free Riemannian optimization with adaptive
finite-difference accuracy and stepsize selection."""

from .bench import (ConvergenceSpec, ProfileCurve, ProfileTable, UNSOLVED,
                    build_profile, convergence_cost, run_campaign)
from .fdgrad import (EvalCounter, GradientEstimate, Objective,
                     extrinsic_fd_gradient, fd_error_bound,
                     intrinsic_fd_gradient)
from .manifolds import (Euclidean, Manifold, ManifoldError, Oblique, Product,
                        SpecialOrthogonal, Stiefel)
from .problems import (ProblemInstance, ProblemSuite, dictionary_learning,
                       euclidean_suite, get_problem, riemannian_suite,
                       rotation_synchronization, suite_metadata_csv,
                       table1_metadata, top_singular_vectors)
from .solver import (DFQRM, EXT_RFD, INT_RFD, ConfigError, IterationRecord,
                     RunTrace, SolverAbort, SolverConfig, SolverState,
                     classify_trace, run, step, theorem1_bound)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceSpec", "ProfileCurve", "ProfileTable", "UNSOLVED",
    "build_profile", "convergence_cost", "run_campaign",
    "EvalCounter", "GradientEstimate", "Objective",
    "extrinsic_fd_gradient", "fd_error_bound", "intrinsic_fd_gradient",
    "Euclidean", "Manifold", "ManifoldError", "Oblique", "Product",
    "SpecialOrthogonal", "Stiefel",
    "ProblemInstance", "ProblemSuite", "dictionary_learning",
    "euclidean_suite", "get_problem", "riemannian_suite",
    "rotation_synchronization", "suite_metadata_csv", "table1_metadata",
    "top_singular_vectors",
    "DFQRM", "EXT_RFD", "INT_RFD", "ConfigError", "IterationRecord",
    "RunTrace", "SolverAbort", "SolverConfig", "SolverState",
    "classify_trace", "run", "step", "theorem1_bound",
]
