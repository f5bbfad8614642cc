//! One interface over the ten covariance estimators.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_covariance, Linkage};
use crate::error::{Error, Result};
use crate::market_data::ReturnPanel;
use crate::matrix::{self, SymmetricMatrix};
use crate::shrinkage::{shrink, ShrinkageTarget};
use crate::spectral::{fit_single_index, rmt0_covariance, rmtm_covariance, si_covariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorId {
    #[serde(rename = "markowitz")]
    Markowitz,
    #[serde(rename = "si")]
    SingleIndex,
    #[serde(rename = "rmt0")]
    Rmt0,
    #[serde(rename = "rmtm")]
    RmtM,
    #[serde(rename = "upgma")]
    Upgma,
    #[serde(rename = "wpgma")]
    Wpgma,
    #[serde(rename = "hausdorff")]
    Hausdorff,
    #[serde(rename = "shrink_si")]
    ShrinkSingleIndex,
    #[serde(rename = "shrink_cc")]
    ShrinkCommonCovariance,
    #[serde(rename = "shrink_ccorr")]
    ShrinkConstantCorrelation,
}

impl EstimatorId {
    /// Report order: baseline, spectral, clustering, shrinkage.
    pub const ALL: [EstimatorId; 10] = [
        EstimatorId::Markowitz,
        EstimatorId::SingleIndex,
        EstimatorId::Rmt0,
        EstimatorId::RmtM,
        EstimatorId::Upgma,
        EstimatorId::Wpgma,
        EstimatorId::Hausdorff,
        EstimatorId::ShrinkSingleIndex,
        EstimatorId::ShrinkCommonCovariance,
        EstimatorId::ShrinkConstantCorrelation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Markowitz => "markowitz",
            EstimatorId::SingleIndex => "si",
            EstimatorId::Rmt0 => "rmt0",
            EstimatorId::RmtM => "rmtm",
            EstimatorId::Upgma => "upgma",
            EstimatorId::Wpgma => "wpgma",
            EstimatorId::Hausdorff => "hausdorff",
            EstimatorId::ShrinkSingleIndex => "shrink_si",
            EstimatorId::ShrinkCommonCovariance => "shrink_cc",
            EstimatorId::ShrinkConstantCorrelation => "shrink_ccorr",
        }
    }

    pub fn group(self) -> &'static str {
        match self {
            EstimatorId::Markowitz => "baseline",
            EstimatorId::SingleIndex | EstimatorId::Rmt0 | EstimatorId::RmtM => "spectral",
            EstimatorId::Upgma | EstimatorId::Wpgma | EstimatorId::Hausdorff => "clustering",
            _ => "shrinkage",
        }
    }

    /// Position in [`EstimatorId::ALL`].
    pub fn rank(self) -> usize {
        Self::ALL.iter().position(|&e| e == self).unwrap_or(usize::MAX)
    }

    pub fn needs_index(self) -> bool {
        matches!(self, EstimatorId::SingleIndex | EstimatorId::ShrinkSingleIndex)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

/// Parses a comma-separated id list, keeping the caller's order and
/// dropping duplicates.
pub fn parse_estimator_list(s: &str) -> Result<Vec<EstimatorId>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let id: EstimatorId = part.parse()?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// What the estimator did on top of producing a matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    /// Sample correlation spectrum (RMT estimators).
    pub eigenvalues: Option<Vec<f64>>,
    pub lambda_max: Option<f64>,
    /// Eigenvalues zeroed or averaged.
    pub n_filtered: Option<usize>,
    pub alpha: Option<f64>,
    pub reversal_fixed: Option<bool>,
    pub diagonal_loaded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub estimator: EstimatorId,
    pub window: (usize, usize),
    pub matrix: SymmetricMatrix,
    pub diagnostics: EstimateDiagnostics,
}

/// Runs estimator `id` on the days in `range`.
pub fn estimate(id: EstimatorId, panel: &ReturnPanel, range: Range<usize>) -> Result<CovarianceEstimate> {
    let window = (range.start, range.end);
    let mut diagnostics = EstimateDiagnostics::default();
    let matrix = match id {
        EstimatorId::Markowitz => matrix::sample_covariance(panel, range)?,
        EstimatorId::SingleIndex => si_covariance(&fit_single_index(panel, range)?),
        EstimatorId::Rmt0 | EstimatorId::RmtM => {
            let est = if id == EstimatorId::Rmt0 {
                rmt0_covariance(panel, range)?
            } else {
                rmtm_covariance(panel, range)?
            };
            diagnostics.lambda_max = Some(est.bound.lambda_max);
            diagnostics.n_filtered = Some(est.filter.n_filtered);
            diagnostics.diagonal_loaded = est.filter.diagonal_loaded;
            diagnostics.eigenvalues = Some(est.eigenvalues);
            est.covariance
        }
        EstimatorId::Upgma | EstimatorId::Wpgma | EstimatorId::Hausdorff => {
            let linkage = match id {
                EstimatorId::Upgma => Linkage::Upgma,
                EstimatorId::Wpgma => Linkage::Wpgma,
                _ => Linkage::Hausdorff,
            };
            let est = cluster_covariance(panel, range, linkage)?;
            diagnostics.reversal_fixed = Some(est.filtered.reversal_fixed);
            diagnostics.diagonal_loaded = est.filtered.diagonal_loaded;
            est.covariance
        }
        EstimatorId::ShrinkSingleIndex
        | EstimatorId::ShrinkCommonCovariance
        | EstimatorId::ShrinkConstantCorrelation => {
            let target = match id {
                EstimatorId::ShrinkSingleIndex => ShrinkageTarget::SingleIndex,
                EstimatorId::ShrinkCommonCovariance => ShrinkageTarget::CommonCovariance,
                _ => ShrinkageTarget::ConstantCorrelation,
            };
            let res = shrink(panel, range, target)?;
            diagnostics.alpha = Some(res.alpha);
            res.matrix
        }
    };
    Ok(CovarianceEstimate {
        estimator: id,
        window,
        matrix,
        diagnostics,
    })
}
