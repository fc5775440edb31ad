"""Bifurcation analysis toolkit for an avascular tumor-immune model.

Subpackages: model (fields, Jacobians, Taylor data), equilibria (cubic
roots and classification), loci (closed-form bifurcation curves),
lyapunov (first Lyapunov coefficient and sign oracle), continuation
(pseudo-arclength curves and cycle families), dynamics (integration,
threshold, infinity chart), cli (command-line front end).
"""

from .model import (
    DomainError,
    ModelParams,
    State,
    TaylorCoefficients,
    composite_params,
    eval_original_field,
    eval_polynomial_field,
    jacobian,
    taylor_expand,
)
from .equilibria import (
    CubicCoefficients,
    Equilibrium,
    EquilibriumKind,
    classify,
    cubic_real_roots,
    discriminant,
    equilibrium_cubic,
    find_equilibria,
    sample_catastrophe_surface,
)
from .loci import (
    LocusKind,
    LocusPoint,
    bautin_lambda,
    bautin_point,
    bautin_psi,
    bt_lambda,
    bt_point,
    fold_psi,
    hopf_lambda_roots,
    hopf_point,
    hopf_surface_residual,
    saddle_node_curve,
    trace_zero_solutions,
)
from .lyapunov import (
    LinearData,
    NormalFormData,
    NotAHopfError,
    ell1_sign_oracle,
    first_lyapunov,
    normal_form_coeffs,
)
from .continuation import (
    Branch,
    BranchPoint,
    ContinuationError,
    CyclePoint,
    LimitCycle,
    continue_cycles,
    continue_equilibria,
    continue_fold_curve,
    continue_hopf_curve,
    lpc_curve,
    refine_lpc,
)
from .dynamics import (
    InfinityChartState,
    PhasePortrait,
    StiffnessError,
    Terminal,
    ThresholdCurve,
    Trajectory,
    infinity_chart_field,
    infinity_chart_linearization,
    infinity_chart_pushforward,
    integrate,
    integrate_raw,
    origin_sector_flow,
    phase_portrait,
    threshold_curve,
)

__version__ = "0.1.0"
