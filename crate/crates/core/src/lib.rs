//! (1+1) evolution strategy with success-based step-size control, the
//! benchmark objectives it is usually studied on, and Monte Carlo tools for
//! checking progress and step-size guarantees empirically.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod defaults;
pub mod error;
pub mod es;
pub mod estimators;
pub mod experiments;
pub mod objectives;
pub mod rng;
pub mod stats;
pub mod verify;

pub use checks::{
    case_study_rate, check_case_study_rate, check_expected_decrease, check_gap,
    check_plateau_decrease, check_quantile_bound, check_regular_limit, check_sigma_upper_bound,
    check_step_scaling, BoundCheckReport, CaseStudy, CheckPart, PlateauStats, SuboptimalityOracle,
};
pub use defaults::{Defaults, Probe, DEFAULTS_JSON, DEFAULTS_VERSION};
pub use error::{Error, Result};
pub use es::{
    apply_offspring, classify_outcome, es_run, es_step, sample_offspring, DivergenceMetric,
    EsParams, EsState, OutcomeLabel, RunTrace, StepRecord, StopReason, StoppingRule,
};
pub use estimators::{
    estimate_eta, estimate_sigma_range, estimate_suboptimality, estimate_success_exponent,
    estimate_success_prob, estimate_xi, BoundStatus, EstimationResult, ExponentFit, SigmaBound,
    SigmaGrid, SigmaRangeEstimate, SuccessMode,
};
pub use experiments::{
    run_convergence_suite, run_experiment, run_occupancy, run_point, run_premature_suite,
    run_rate_vs_dimension, run_ridge_sweep, run_saddle_traversal, run_strip_jump_sweep, Aggregates,
    ExperimentConfig, ExperimentReport, HistoryPoint, InitPolicy, OccupancyStats,
    PrematureScenario, ReplicateResult, Suite, SweepPoint,
};
pub use objectives::{
    cantor_contains, list_objectives, make_objective, unit_ball_suboptimality, CantorSpec,
    CantorVariant, Fitness, JumpVariant, Objective, ObjectiveSpec,
};
pub use stats::Proportion;
pub use verify::{
    parse_vector, pass_counts, run_all_checks, run_check, run_check_with, summary_csv, CheckId,
    CheckOverrides,
};
