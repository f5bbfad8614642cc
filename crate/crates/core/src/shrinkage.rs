//! Linear shrinkage `Q = αT + (1 − α)S` toward three structured targets.
//!
//! The intensity is the analytic unbiased estimate
//!
//! ```text
//! α = Σ_(i,j)∈P V̂ar(s_ij) / Σ_(i,j)∈P (s_ij − t_ij)²,   clamped to [0, 1]
//! ```
//!
//! where, with `x` the centered (or, for correlations, standardized) data of
//! a window of length `n`, `w_kij = x_ki x_kj` and `w̄_ij` its time mean,
//!
//! ```text
//! s_ij = n/(n−1) · w̄_ij,     V̂ar(s_ij) = n/(n−1)³ · Σ_k (w_kij − w̄_ij)².
//! ```
//!
//! The pair set `P` is every entry for the common-covariance target, the
//! off-diagonal entries for the single-index target (whose diagonal equals
//! the sample variances, so those terms contribute nothing), and the
//! off-diagonal correlations for the constant-correlation target.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnPanel;
use crate::matrix::{self, cov_to_corr, corr_to_cov, dot, SymmetricMatrix};
use crate::spectral::{fit_single_index, si_covariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShrinkageTarget {
    #[serde(rename = "si")]
    SingleIndex,
    #[serde(rename = "common_cov")]
    CommonCovariance,
    #[serde(rename = "const_corr")]
    ConstantCorrelation,
}

impl ShrinkageTarget {
    pub const ALL: [ShrinkageTarget; 3] = [
        ShrinkageTarget::SingleIndex,
        ShrinkageTarget::CommonCovariance,
        ShrinkageTarget::ConstantCorrelation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShrinkageTarget::SingleIndex => "si",
            ShrinkageTarget::CommonCovariance => "common_cov",
            ShrinkageTarget::ConstantCorrelation => "const_corr",
        }
    }
}

impl fmt::Display for ShrinkageTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShrinkageTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "target".into(),
                reason: format!("unknown shrinkage target `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageResult {
    /// The shrunk covariance `Q`.
    pub matrix: SymmetricMatrix,
    pub alpha: f64,
    pub target_id: ShrinkageTarget,
    /// The target in covariance space (for the constant-correlation target,
    /// the correlation target rescaled by the sample standard deviations).
    pub target: SymmetricMatrix,
}

/// Mean sample variance on the diagonal, mean sample covariance elsewhere.
pub fn target_common_covariance(s: &SymmetricMatrix) -> SymmetricMatrix {
    let n = s.dim();
    let mean_var = s.trace() / n as f64;
    let mean_cov = if n > 1 {
        let total: f64 = (0..n).map(|i| s.row(i).iter().sum::<f64>()).sum();
        (total - s.trace()) / (n * (n - 1)) as f64
    } else {
        0.0
    };
    SymmetricMatrix::from_fn(n, |i, j| if i == j { mean_var } else { mean_cov })
}

/// Unit diagonal, mean sample correlation elsewhere.
pub fn target_constant_correlation(c: &SymmetricMatrix) -> SymmetricMatrix {
    let n = c.dim();
    let r_bar = mean_off_diagonal(c);
    SymmetricMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { r_bar })
}

fn mean_off_diagonal(c: &SymmetricMatrix) -> f64 {
    let n = c.dim();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += c.get(i, j);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Per-entry sampling variances `V̂ar(s_ij)` of the cross-product means of
/// `x` (rows are series, already centered or standardized).
pub fn entry_variances(x: &[Vec<f64>]) -> SymmetricMatrix {
    let n_obs = x.first().map_or(0, Vec::len) as f64;
    let squares: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * v).collect()).collect();
    let factor = n_obs / ((n_obs - 1.0) * (n_obs - 1.0) * (n_obs - 1.0));
    SymmetricMatrix::from_fn(x.len(), |i, j| {
        let mean = dot(&x[i], &x[j]) / n_obs;
        let spread = (dot(&squares[i], &squares[j]) - n_obs * mean * mean).max(0.0);
        factor * spread
    })
}

fn standardized(x: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let denom = (x.first().map_or(0, Vec::len) as f64 - 1.0).max(1.0);
    x.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let sd = (dot(&row, &row) / denom).sqrt();
            if sd > 0.0 {
                Ok(row.into_iter().map(|v| v / sd).collect())
            } else {
                Err(Error::ZeroVariance { index: i })
            }
        })
        .collect()
}

fn ratio_to_alpha(numerator: f64, denominator: f64, target: ShrinkageTarget) -> f64 {
    if !(denominator > 0.0) {
        log::info!("{target}: sample matrix already equals the target, alpha = 1");
        return 1.0;
    }
    (numerator / denominator).clamp(0.0, 1.0)
}

/// Everything the three targets need from one window.
struct WindowMoments {
    centered: Vec<Vec<f64>>,
    sample: SymmetricMatrix,
}

impl WindowMoments {
    fn new(panel: &ReturnPanel, range: Range<usize>) -> Result<Self> {
        if range.len() < 3 {
            return Err(Error::DegenerateWindow {
                required: 3,
                actual: range.len(),
            });
        }
        let sample = matrix::sample_covariance(panel, range.clone())?;
        let centered = matrix::centered(&panel.window(range));
        Ok(Self { centered, sample })
    }
}

fn intensity_from(
    moments: &WindowMoments,
    target_id: ShrinkageTarget,
    target: &SymmetricMatrix,
) -> Result<f64> {
    let n = moments.sample.dim();
    let (variances, entries, reference) = match target_id {
        ShrinkageTarget::ConstantCorrelation => {
            let z = standardized(moments.centered.clone())?;
            let (corr, _) = cov_to_corr(&moments.sample)?;
            let corr_target = target_constant_correlation(&corr);
            (entry_variances(&z), corr, corr_target)
        }
        _ => (
            entry_variances(&moments.centered),
            moments.sample.clone(),
            target.clone(),
        ),
    };
    let include_diagonal = target_id == ShrinkageTarget::CommonCovariance;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j && !include_diagonal {
                continue;
            }
            numerator += variances.get(i, j);
            let d = entries.get(i, j) - reference.get(i, j);
            denominator += d * d;
        }
    }
    Ok(ratio_to_alpha(numerator, denominator, target_id))
}

fn build_target(
    panel: &ReturnPanel,
    range: Range<usize>,
    moments: &WindowMoments,
    target_id: ShrinkageTarget,
) -> Result<SymmetricMatrix> {
    match target_id {
        ShrinkageTarget::SingleIndex => Ok(si_covariance(&fit_single_index(panel, range)?)),
        ShrinkageTarget::CommonCovariance => Ok(target_common_covariance(&moments.sample)),
        ShrinkageTarget::ConstantCorrelation => {
            let (corr, stds) = cov_to_corr(&moments.sample)?;
            let mut t = corr_to_cov(&target_constant_correlation(&corr), &stds)?;
            for (i, v) in moments.sample.diagonal().into_iter().enumerate() {
                t.set(i, i, v);
            }
            Ok(t)
        }
    }
}

/// Analytic shrinkage intensity for `target_id` on one window.
pub fn shrinkage_intensity(
    panel: &ReturnPanel,
    range: Range<usize>,
    target_id: ShrinkageTarget,
) -> Result<f64> {
    let moments = WindowMoments::new(panel, range.clone())?;
    let target = build_target(panel, range, &moments, target_id)?;
    intensity_from(&moments, target_id, &target)
}

/// Shrinks the window's sample covariance with the analytic intensity.
pub fn shrink(
    panel: &ReturnPanel,
    range: Range<usize>,
    target_id: ShrinkageTarget,
) -> Result<ShrinkageResult> {
    shrink_impl(panel, range, target_id, None)
}

/// Shrinks with a caller-chosen intensity in `[0, 1]`.
pub fn shrink_with_alpha(
    panel: &ReturnPanel,
    range: Range<usize>,
    target_id: ShrinkageTarget,
    alpha: f64,
) -> Result<ShrinkageResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha".into(),
            reason: format!("must lie in [0, 1], got {alpha}"),
        });
    }
    shrink_impl(panel, range, target_id, Some(alpha))
}

fn shrink_impl(
    panel: &ReturnPanel,
    range: Range<usize>,
    target_id: ShrinkageTarget,
    alpha: Option<f64>,
) -> Result<ShrinkageResult> {
    let moments = WindowMoments::new(panel, range.clone())?;
    let target = build_target(panel, range, &moments, target_id)?;
    let alpha = match alpha {
        Some(a) => a,
        None => intensity_from(&moments, target_id, &target)?,
    };
    // Rescaling by the sample standard deviations is linear, so blending the
    // correlations and rescaling equals blending the rescaled target with S.
    let mut matrix = target.blend(alpha, &moments.sample, 1.0 - alpha);
    if target_id == ShrinkageTarget::ConstantCorrelation {
        for (i, v) in moments.sample.diagonal().into_iter().enumerate() {
            matrix.set(i, i, v);
        }
    }
    Ok(ShrinkageResult {
        matrix,
        alpha,
        target_id,
        target,
    })
}
