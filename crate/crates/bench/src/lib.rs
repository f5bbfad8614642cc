//! Fixtures shared by the benchmarks.

use covlab::matrix::{cov_to_corr, sample_covariance};
use covlab::{ReturnPanel, SymmetricMatrix, SyntheticSpec};

/// Synthetic one-factor panel with the default parameter ranges.
pub fn panel(n_assets: usize, n_days: usize) -> ReturnPanel {
    SyntheticSpec {
        n_assets,
        n_days,
        ..SyntheticSpec::default()
    }
    .generate()
    .expect("valid synthetic spec")
    .returns
}

/// Sample covariance and correlation of the first `days` of `panel`.
pub fn moments(panel: &ReturnPanel, days: usize) -> (SymmetricMatrix, SymmetricMatrix) {
    let cov = sample_covariance(panel, 0..days).expect("valid window");
    let (corr, _) = cov_to_corr(&cov).expect("non-degenerate assets");
    (cov, corr)
}
