"""Sleep-wake scheduling for Bayesian quickest change detection.

A fusion centre watches ``n`` sensors for a disruption that arrives at a
random slot.  Each slot it either declares the change or picks how many
sensors stay awake, trading sensing energy against detection delay and
false alarms.  This package solves the resulting belief-state dynamic
programs, extracts threshold policies, and simulates them.
"""

from .belief import (
    TERMINAL,
    logit,
    one_step_predict,
    posterior_update,
    sigmoid,
    sufficient_statistic_update,
)
from .dp import (
    BeliefGrid,
    ConvergenceError,
    ExpectationOperator,
    LikelihoodAtoms,
    SolveReport,
    ValueFunction,
    bellman_control_m,
    bellman_control_q,
    bellman_maps,
    bellman_open_loop,
    binomial_weights,
    build_expectation_operator,
    expected_future_cost,
    gauss_legendre_atoms,
    monte_carlo_atoms,
    operator_from_atoms,
    solve_finite_horizon,
    value_iteration,
)
from .model import (
    ChangePrior,
    Costs,
    Problem,
    SensorModel,
    log_likelihood_ratio,
    pdf,
    prior_mass,
)
from .oracle import DiscreteInstance, brute_force_value, likelihood_atoms
from .policy import (
    Policy,
    awake_count_by_differential,
    differential_cost,
    extract_policy,
    extract_threshold,
    optimal_awake_count,
    optimal_wake_prob,
)
from .sim import (
    CalibrationResult,
    EpisodeResult,
    Metrics,
    SweepResult,
    calibrate_lambda_f,
    default_horizon_cap,
    estimate_metrics,
    metrics_from_episodes,
    run_episode,
    run_episodes,
    sample_change_time,
    sweep_open_loop_q,
)

__version__ = "0.1.0"

__all__ = [
    "BeliefGrid",
    "CalibrationResult",
    "ChangePrior",
    "ConvergenceError",
    "Costs",
    "DiscreteInstance",
    "EpisodeResult",
    "ExpectationOperator",
    "LikelihoodAtoms",
    "Metrics",
    "Policy",
    "Problem",
    "SensorModel",
    "SolveReport",
    "SweepResult",
    "TERMINAL",
    "ValueFunction",
    "awake_count_by_differential",
    "bellman_control_m",
    "bellman_control_q",
    "bellman_maps",
    "bellman_open_loop",
    "binomial_weights",
    "brute_force_value",
    "build_expectation_operator",
    "calibrate_lambda_f",
    "default_horizon_cap",
    "differential_cost",
    "estimate_metrics",
    "expected_future_cost",
    "extract_policy",
    "extract_threshold",
    "gauss_legendre_atoms",
    "likelihood_atoms",
    "log_likelihood_ratio",
    "logit",
    "metrics_from_episodes",
    "monte_carlo_atoms",
    "one_step_predict",
    "operator_from_atoms",
    "optimal_awake_count",
    "optimal_wake_prob",
    "pdf",
    "posterior_update",
    "prior_mass",
    "run_episode",
    "run_episodes",
    "sample_change_time",
    "sigmoid",
    "solve_finite_horizon",
    "sufficient_statistic_update",
    "value_iteration",
]
