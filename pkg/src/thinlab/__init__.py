"""thinlab: finite-difference laboratory for thin-obstacle problems."""

__version__ = "0.1.0"

from .errors import (
    ThinLabError, ConfigError, InputDataError, CompatibilityError,
    CFLError, SweepConvergenceError, NumericsError, BudgetError,
    PreconditionError,
)
from .geometry import (
    NodeClass, CylinderKind, ParabolicPoint, GridSpec, HalfCylinderGrid,
    build_grid, parabolic_distance, cylinder_nodes,
)
from .operators import (
    OperatorKind, EllipticityPair, EllipticOperator, trace_operator,
    pucci_minus, pucci_plus, max_linear, eval_operator, eval_operator_field,
    eigenvalues_sym, eigenvalues_sym_field, reflect_matrix,
    check_structural_assumptions, linearization_coeffs,
)
from .problems import (
    Obstacle, BoundaryData, ProblemSpec, SpaceTimeField, GridData,
    sample_to_grid, validate_compatibility, make_problem, problem_names,
    neumann_validation_spec,
)
from .solvers import (
    SolverConfig, SolveResult, cfl_limit, resolve_substeps,
    hessian_interior, hessian_thin, discrete_operator_apply,
    solve_neumann, solve_penalized, solve_signorini, brute_force_oracle,
)
from .analysis import (
    SigmaField, SigmaSignCheck, ContactDecomposition, ComplementarityResidual,
    SemiconcavityReport, ReflectionReport, UDecayFit, SigmaDecayFit,
    BarrierBox, BarrierReport, RegularityReport,
    compute_sigma, check_sigma_nonpositive, decompose_contact,
    complementarity_residual, omega_gamma_set, semiconcavity_report,
    max_normal_curvature_near_contact_edge, even_reflection,
    reflection_defect, reflection_margin, reflection_check, holder_seminorm,
    holder_time_seminorm, thin_node_set, fit_u_decay, fit_sigma_decay,
    select_free_boundary_point, barrier_threshold, default_barrier_box,
    barrier_h_check, regularity_report, face_obstacle_values,
)
from .config import (
    RunConfig, parse_config, render_config, load_config,
    CHECK_NAMES, DEFAULT_CHECKS,
)
from .runs import (
    RunManifest, render_manifest, render_report, verify_battery,
    run_solve, run_verify, run_sweep, run_oracle_compare,
)
