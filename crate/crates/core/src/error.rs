use thiserror::Error;

use crate::matrix::SymmetricMatrix;

/// Errors produced anywhere in the estimation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing cell at row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },

    #[error("non-positive price {value} for `{ticker}` on {date}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        value: f64,
    },

    #[error("dates not strictly increasing at row {row}: `{previous}` then `{date}`")]
    UnsortedDates {
        row: usize,
        previous: String,
        date: String,
    },

    #[error("malformed value `{value}` at row {row}, column `{column}`")]
    Malformed {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("window of length {window} does not fit twice in {available} days from offset {offset}")]
    WindowTooLong {
        window: usize,
        available: usize,
        offset: usize,
    },

    #[error("degenerate window: need at least {required} observations, got {actual}")]
    DegenerateWindow { required: usize, actual: usize },

    #[error("asset {index} has zero variance")]
    ZeroVariance { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigen solver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("single index estimation requires index returns")]
    MissingIndex,

    #[error("index return series has zero variance")]
    ZeroIndexVariance,

    #[error("largest correlation eigenvalue {lambda1} outside [0, {n}]")]
    InvalidLambda1 { lambda1: f64, n: usize },

    /// Every correlation eigenvalue fell below the noise edge. The fallback
    /// (diagonal of sample variances) is carried for callers that accept it.
    #[error("all correlation eigenvalues below the noise edge {lambda_max}")]
    AllEigenvaluesClipped {
        lambda_max: f64,
        fallback: Box<SymmetricMatrix>,
    },

    #[error("1ᵀS⁺1 = {value} is too small to normalize the weights")]
    DegenerateDenominator { value: f64 },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("efficient frontier is degenerate (mean vector parallel to ones)")]
    DegenerateFrontier,

    #[error("active-set solver exceeded {limit} working-set changes")]
    MaxIterations { limit: usize },

    #[error("t-test needs at least 2 observations, got {0}")]
    InsufficientObservations(usize),

    #[error("unknown estimator `{0}`; valid ids: markowitz, si, rmt0, rmtm, upgma, wpgma, hausdorff, shrink_si, shrink_cc, shrink_ccorr")]
    UnknownEstimator(String),

    #[error("unknown constraint mode `{0}`; valid: unconstrained, long_only")]
    UnknownMode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
