"""Q-learning with linear function approximation, studied end to end:

finite MDPs with exact dynamic-programming oracles, feature subspaces with
weighted projections and truncation, the classical semi-gradient update next
to target-network variants, deterministic fixed-point oracles that predict
where each run goes, finite-sample error bounds, and a reproducible CSV
experiment harness.
"""

from .algorithms import (
    AlgoConfig,
    RunLog,
    RunRecord,
    bootstrap_values,
    projection_variant_run,
    semi_gradient_run,
    target_network_run,
)
from .envs import (
    Environment,
    baird,
    baird_features,
    default_radius,
    load_environment,
    random_mdp,
    random_tabular,
    save_environment,
    tabular,
    two_state,
    with_features,
    with_normalized_features,
)
from .features import (
    FeatureMap,
    StateActionWeights,
    approx_error_estimate,
    gram_and_lambda_min,
    load_features,
    normalize_features,
    project_span,
    projection_coefficients,
    save_features,
    truncate,
    truncation_is_projection_check,
    truncation_projection_margins,
    weighted_lp_norm,
    weights_from,
)
from .harness import (
    ALGOS,
    CSV_HEADER,
    FIG_PRESETS,
    ExperimentSpec,
    SweepRung,
    build_environment,
    logs_to_csv,
    run_checks,
    run_experiment,
    run_fig,
    shipped_sweep,
    sweep_env,
    sweep_experiment,
    bound_inputs_for,
    write_csv,
)
from .mdp import (
    ConvergenceFailure,
    InsufficientExplorationError,
    Mdp,
    bellman_opt,
    check_sufficient_exploration,
    greedy_policy,
    mixing_time,
    policy_transition,
    sample_step,
    stationary_distribution,
    state_values,
    uniform_policy,
    value_iteration,
)
from .oracles import (
    BoundInputs,
    BoundTerms,
    CoupledFixedPoint,
    DriftReport,
    MapIterates,
    TruncatedFixedPoint,
    contraction_modulus_estimate,
    coupled_q_fixed_point,
    finite_sample_bound,
    inner_loop_mse_bound,
    iterate_map,
    negative_drift_check,
    projected_bellman_map,
    modified_bellman_solve,
    truncated_fixed_point,
    truncated_projected_bellman_map,
    two_state_map,
)

__version__ = "0.1.0"

__all__ = [
    "ALGOS",
    "AlgoConfig",
    "BoundInputs",
    "BoundTerms",
    "CSV_HEADER",
    "ConvergenceFailure",
    "CoupledFixedPoint",
    "DriftReport",
    "Environment",
    "ExperimentSpec",
    "FIG_PRESETS",
    "FeatureMap",
    "InsufficientExplorationError",
    "MapIterates",
    "Mdp",
    "RunLog",
    "RunRecord",
    "StateActionWeights",
    "SweepRung",
    "TruncatedFixedPoint",
    "approx_error_estimate",
    "baird",
    "baird_features",
    "bellman_opt",
    "bootstrap_values",
    "build_environment",
    "check_sufficient_exploration",
    "contraction_modulus_estimate",
    "coupled_q_fixed_point",
    "default_radius",
    "finite_sample_bound",
    "gram_and_lambda_min",
    "greedy_policy",
    "inner_loop_mse_bound",
    "iterate_map",
    "load_environment",
    "load_features",
    "logs_to_csv",
    "mixing_time",
    "negative_drift_check",
    "normalize_features",
    "policy_transition",
    "project_span",
    "projected_bellman_map",
    "projection_coefficients",
    "projection_variant_run",
    "random_mdp",
    "random_tabular",
    "modified_bellman_solve",
    "run_checks",
    "run_experiment",
    "run_fig",
    "sample_step",
    "save_environment",
    "save_features",
    "semi_gradient_run",
    "shipped_sweep",
    "state_values",
    "stationary_distribution",
    "sweep_env",
    "sweep_experiment",
    "tabular",
    "target_network_run",
    "bound_inputs_for",
    "truncate",
    "truncated_fixed_point",
    "truncated_projected_bellman_map",
    "truncation_is_projection_check",
    "truncation_projection_margins",
    "two_state",
    "two_state_map",
    "uniform_policy",
    "value_iteration",
    "weighted_lp_norm",
    "weights_from",
    "with_features",
    "with_normalized_features",
    "write_csv",
]
