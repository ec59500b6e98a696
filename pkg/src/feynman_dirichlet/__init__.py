"""Feynman-formula approximation of parabolic Cauchy-Dirichlet problems.

The solution of ``u_t = Lu`` with zero boundary values is approximated by
iterating a Gaussian integral operator ``F_t`` applied to a sup-norm
preserving C^2 extension of the initial datum across the boundary.
"""

from .chernoff import ChernoffRun, ConvergenceRow, IterationPlan, chernoff_iterate, chernoff_run, convergence_table
from .config import ExperimentConfig
from .errors import *  # noqa: F403
from .extension import (
    AdaptedChart,
    ExtensionOperator,
    Frame,
    HalflineExtension,
    LocalExtension,
    PartitionOfUnity,
    SqueezeMap1D,
    boundary_identity_residual,
    build_adapted_chart,
    build_extension,
    chart_frame,
    extend_halfline,
    global_extend,
    local_extend,
    oblique_direction,
    squeeze_eval,
    transformed_coefficients,
)
from .feynman import (
    FeynmanStep,
    StepConfig,
    consistency_residual,
    feynman_apply,
    feynman_apply_form2,
    grid_step,
    kernel_weight,
)
from .geometry import Chart, CutoffFamily, Disc, Domain, Interval, boundary_charts, boundary_distance, cutoff_eval
from .harness import DLMember, build_dl_member
from .oracles import McConfig, analytic_heat, crank_nicolson, feynman_kac_estimate
from .operator import (
    EllipticOperator,
    TestFunction,
    ValidationReport,
    apply_L,
    check_boundary_membership,
    dissipativity_residual,
    lambda0,
    operator_from_spec,
    scalar_field,
    validate,
)
from .sampled import Grid, SampledFunction
