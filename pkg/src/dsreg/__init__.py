"""Double-sparse linear regression toolkit.

Estimators (sparse group Lasso and sparse group Slope with theoretical
tuning), the sorted-penalty machinery they rely on, certification of the
design-matrix conditions behind their error bounds, packing-based
minimax lower bounds, and random-design phase experiments.
"""

from .groups import GroupLayout, SparsityBudget, enumerate_family, family_count
from .penalties import (
    CombinedStarPenalty,
    GroupL2Penalty,
    GroupSortedPenalty,
    L1Penalty,
    SortedL1Penalty,
    SparseGroupPenalty,
    WeightSequences,
    envelope_N,
    lambda_sharp,
    make_weights,
    norm_combined_star,
    norm_group_sorted,
    norm_l1,
    norm_l12,
    norm_sorted_l1,
)
from .solver import (
    FitResult,
    RegressionProblem,
    SolverConfig,
    TheoreticalRate,
    TuningPlan,
    fit,
    kkt_residual,
    objective_sglasso,
    objective_sgslope,
    rate_quantity,
    theoretical_rate,
    theoretical_tuning,
)
from .conditions import (
    ConditionReport,
    ConeSearchConfig,
    ConeSpec,
    check_sgnorm,
    cone_inclusion_check,
    cone_membership,
    estimate_cone_eigenvalue,
)
from .stochastic import (
    GaussBoundReport,
    NoiseFunctionals,
    TailReport,
    compute_noise_functionals,
    compute_phi,
    event_omega,
    gauss_bound_suite,
    psi1,
    psi2,
    tail_suite,
    upsilons,
)
from .packing import (
    PackingSet,
    build_packing,
    gap_report,
    lower_bound_value,
    packing_bound,
    sign_packing,
)
from .randomdesign import (
    ComplexityBounds,
    DesignEnsemble,
    MaureyReport,
    complexity_bounds,
    gaussian_complexity_mc,
    generate,
    maurey_check,
    orthonormal_design,
    phase_diagram,
    rate_quantity_sample,
    small_ball_probe,
)
from .experiment import ExperimentConfig, emit_report, make_signal, run_experiment

__version__ = "0.1.0"
