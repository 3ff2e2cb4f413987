//! # losvm-core
//!
//! Outlier detection on dirty training data with leave-out one-class support
//! vector machines (OCSVM) and support vector data description (SVDD).
//!
//! One-class models trained on data that already contains anomalies tend to
//! absorb those anomalies into the support vector set, masking them. This
//! crate scores every point against a model that leaves it out: points with
//! zero multiplier are scored against the initial model (leaving them out
//! provably does not move the optimum), support vectors are scored by a
//! warm-start retrain that hands their weight to an awakened point, patches
//! the maintained gradient, and re-converges in a handful of pair updates.
//! The worst-scoring support vectors can then be removed in batches and the
//! procedure repeated, exposing outliers that were masked by their
//! neighbors.
//!
//! Modules:
//! - [`dataset`]: CSV ingestion, cleaning, standardization, synthetic
//!   benchmark generation
//! - [`kernel`]: RBF kernel, bandwidth heuristics, swap-aware kernel row
//!   cache
//! - [`solver`]: most-violating-pair SMO for the shared OCSVM/SVDD dual
//! - [`losvm`]: leave-out scoring and repeated batchwise removal
//! - [`metrics`]: average precision, adjusted average precision, AUROC, and
//!   the k-nearest-neighbor baseline

pub mod dataset;
pub mod error;
pub mod kernel;
pub mod losvm;
pub mod metrics;
pub mod solver;

pub use dataset::{load_csv, standardize, synth_dirty, total_variance, DataMatrix};
pub use error::{Error, Result};
pub use kernel::{
    gamma_from_sigma, gamma_scott, gamma_silverman, gamma_sklearn, KernelContext, KernelKind,
};
pub use losvm::{
    leave_out_eval, leave_out_eval_retrained, leave_out_score, redistribute_alpha, run_losvm,
    run_losvm_with, swap_out, LeaveOutOutcome, RemovalTrace, RunOptions, ScoreMethod,
};
pub use metrics::{
    adjusted_average_precision, auroc, average_precision, knn_baseline, MetricSummary,
    ScoreEntry, ScoreReport, ScoredPoint,
};
pub use solver::{
    decision_score, decision_score_index, init_model, kkt_gap, objective, optimize,
    select_violating_pair, smo_step, train, update_gradient, SvmModel, Variant,
};
