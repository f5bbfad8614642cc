//! Covariance estimation and minimum-variance portfolio laboratory.
//!
//! Ten covariance estimators (the sample matrix, a single index model, two
//! random-matrix eigenvalue filters, three hierarchical-clustering filters and
//! three linear shrinkage variants) feed a global-minimum-variance optimizer
//! with and without a no-short-selling constraint. A rolling backtest engine
//! compares them window by window.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backtest;
pub mod cluster;
pub mod error;
pub mod estimator;
pub mod market_data;
pub mod matrix;
pub mod optimizer;
pub mod report;
pub mod shrinkage;
pub mod spectral;
pub mod stats;

pub use backtest::{run_backtest, BacktestConfig, BacktestReport, CellSummary, WindowResult};
pub use error::{Error, Result};
pub use estimator::{estimate, CovarianceEstimate, EstimatorId};
pub use market_data::{PricePanel, ReturnPanel, SyntheticSpec, WindowPair};
pub use matrix::{EigenDecomposition, SymmetricMatrix};
pub use optimizer::{ConstraintMode, PortfolioWeights};
