use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the losvm pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("cell at data row {row}, column {col} is not numeric: {value:?}")]
    BadCell { row: usize, col: usize, value: String },

    #[error("label column {0:?} not found in header")]
    LabelColumnNotFound(String),

    #[error("label column {0:?} requested but the file has no header row")]
    LabelWithoutHeader(String),

    #[error("label at data row {row} must be 0/1 or no/yes, got {value:?}")]
    BadLabel { row: usize, value: String },

    #[error("data set is empty after cleaning")]
    EmptyDataset,

    #[error("operation needs at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("index {index} out of range for active size {active}")]
    IndexOutOfRange { index: usize, active: usize },

    #[error("box constraint infeasible: C * n = {product} < 1 cannot satisfy sum(alpha) = 1")]
    InfeasibleBox { product: f64 },

    #[error("convergence tolerance must be positive, got {0}")]
    BadTolerance(f64),

    #[error("solver did not converge within {max_iter} pair updates (KKT gap {gap:.3e})")]
    DidNotConverge { max_iter: u64, gap: f64 },

    #[error("model is not converged")]
    NotConverged,

    #[error("alpha redistribution needs headroom {needed:.6e}, only {available:.6e} available")]
    NoHeadroom { needed: f64, available: f64 },

    #[error("removal budget R = {r} must be smaller than the data set size {n}")]
    RemovalBudgetTooLarge { r: usize, n: usize },

    #[error("batch count b = {b} must be >= 1 and divide the removal budget R = {r}")]
    BatchMismatch { r: usize, b: usize },

    #[error("metric needs at least one labeled outlier")]
    NoOutliers,

    #[error("metric needs both outlier and inlier labels")]
    SingleClass,

    #[error("k-nearest-neighbor scoring needs more than k = {k} rows, got {n}")]
    NotEnoughNeighbors { k: usize, n: usize },

    #[error("data set carries no labels")]
    MissingLabels,
}

pub type Result<T> = std::result::Result<T, Error>;
