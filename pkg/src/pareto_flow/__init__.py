"""Multiobjective steepest-descent flows for convex, possibly nonsmooth objectives."""
from .config import load_config, problem_from_dict, problem_from_json, problem_to_json
from .convex_core import (
    ConeSpec, ConvexHullSpec, MinNormResult, SubdifferentialSet, min_norm_point, project_cone_polar,
    project_simplex,
)
from .direction import (
    DirectionResult, check_certificate, check_formulation_equivalence, regularized_direction,
    steepest_direction,
)
from .dynamics import (
    SolverConfig, Trajectory, read_trajectory_csv, run_max, run_mog, run_scalarized, trajectory_csv,
    verify_descent, verify_energy,
)
from .errors import (
    CapabilityError, ConfigError, ConvergenceError, DimensionError, InfeasiblePointError,
    ParetoFlowError, StepFailure,
)
from .objectives import (
    Affine, Ball, Box, EuclideanNorm, Halfspaces, HuberL1, L1, LeastSquares, MaxAffine,
    MoreauEnvelope, Problem, Quadratic, WholeSpace, builtin_problem, closed_form_field,
)
from .pareto_analysis import (
    FrontSample, ParetoReport, check_critical, nondominated_mask, sample_front,
    weak_pareto_bruteforce,
)
from .yosida_path import YosidaSweep, run_mog_lambda, yosida_sweep

__version__ = "0.1.0"
