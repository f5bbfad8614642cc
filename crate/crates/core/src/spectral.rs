//! Estimators built on the eigenstructure of the sample correlation matrix:
//! the single index model and the two random-matrix noise filters.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    self, cov_to_corr, corr_to_cov, dot, eig_symmetric, is_positive_definite, load_correlation,
    EigenDecomposition, SymmetricMatrix,
};
use crate::market_data::ReturnPanel;

/// Eigenvalue floor used when a filtered correlation has to be repaired.
pub const LOADING_EPSILON: f64 = 1e-8;

/// One-factor regression of every asset on the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleIndexFit {
    pub betas: Vec<f64>,
    /// Variance of the index over the window.
    pub index_variance: f64,
    /// Residual variances, the diagonal of `D`.
    pub idio_variances: Vec<f64>,
}

pub fn fit_single_index(panel: &ReturnPanel, range: Range<usize>) -> Result<SingleIndexFit> {
    let index = panel.index_window(range.clone()).ok_or(Error::MissingIndex)?;
    let t = index.len();
    if t < 3 {
        return Err(Error::DegenerateWindow {
            required: 3,
            actual: t,
        });
    }
    let denom = (t - 1) as f64;
    let centered_index = matrix::centered(&[index]).pop().expect("one series");
    let index_variance = dot(&centered_index, &centered_index) / denom;
    if !(index_variance > 0.0) {
        return Err(Error::ZeroIndexVariance);
    }
    let mut betas = Vec::with_capacity(panel.n_assets());
    let mut idio_variances = Vec::with_capacity(panel.n_assets());
    for series in panel.window(range) {
        let r = matrix::centered(&[series]).pop().expect("one series");
        let cov = dot(&r, &centered_index) / denom;
        let var = dot(&r, &r) / denom;
        let beta = cov / index_variance;
        betas.push(beta);
        idio_variances.push((var - beta * beta * index_variance).max(0.0));
    }
    Ok(SingleIndexFit {
        betas,
        index_variance,
        idio_variances,
    })
}

/// `σ_00 β βᵀ + D`.
pub fn si_covariance(fit: &SingleIndexFit) -> SymmetricMatrix {
    let b = &fit.betas;
    SymmetricMatrix::from_fn(b.len(), |i, j| {
        let common = fit.index_variance * b[i] * b[j];
        if i == j {
            common + fit.idio_variances[i]
        } else {
            common
        }
    })
}

/// Upper noise edge for correlation eigenvalues with the market mode discounted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmtBound {
    pub lambda_max: f64,
    pub sigma_sq: f64,
    /// `N / T`.
    pub q: f64,
}

/// `λ_max = σ² (1 + q + 2√q)` with `σ² = 1 − λ_1/N` and `q = N/T`.
pub fn rmt_bound(n: usize, t: usize, lambda1: f64) -> Result<RmtBound> {
    if n == 0 || t == 0 {
        return Err(Error::InvalidDimension(format!(
            "noise edge needs N, T >= 1, got N={n}, T={t}"
        )));
    }
    let nf = n as f64;
    // Roundoff can push the top eigenvalue of an all-ones correlation past N.
    let slack = 1e-9 * nf;
    if !(lambda1 >= -slack && lambda1 <= nf + slack) {
        return Err(Error::InvalidLambda1 { lambda1, n });
    }
    let sigma_sq = (1.0 - lambda1.clamp(0.0, nf) / nf).max(0.0);
    let q = nf / t as f64;
    Ok(RmtBound {
        lambda_max: sigma_sq * (1.0 + q + 2.0 * q.sqrt()),
        sigma_sq,
        q,
    })
}

/// A filtered correlation matrix and what the filter did to get there.
#[derive(Debug, Clone)]
pub struct RmtFiltered {
    pub correlation: SymmetricMatrix,
    /// Number of eigenvalues below the edge (zeroed or averaged).
    pub n_filtered: usize,
    /// Trace of the filtered matrix before any renormalization.
    pub h_trace: f64,
    /// Value the filtered eigenvalues were replaced with.
    pub replacement: f64,
    pub clamped: bool,
    pub diagonal_loaded: bool,
}

/// Zeroes every eigenvalue below `lambda_max`, then forces a unit diagonal.
pub fn rmt0_filter(eig: &EigenDecomposition, lambda_max: f64) -> Result<RmtFiltered> {
    let kept: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l >= lambda_max { l } else { 0.0 })
        .collect();
    let n_filtered = kept.iter().filter(|&&l| l == 0.0).count();
    let h = eig.compose(&kept);
    let h_trace = h.trace();

    let mut clamped = false;
    let mut corr = SymmetricMatrix::from_fn(h.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            let v = h.get(i, j);
            if v.abs() > 1.0 {
                clamped = true;
            }
            v.clamp(-1.0, 1.0)
        }
    });
    if clamped {
        log::warn!("rmt0: filtered correlation entries clamped to [-1, 1]");
    }
    let mut diagonal_loaded = false;
    if !is_positive_definite(&corr) {
        log::warn!("rmt0: filtered correlation not positive definite, loading diagonal");
        corr = load_correlation(&corr, LOADING_EPSILON)?;
        diagonal_loaded = true;
    }
    Ok(RmtFiltered {
        correlation: corr,
        n_filtered,
        h_trace,
        replacement: 0.0,
        clamped,
        diagonal_loaded,
    })
}

/// Replaces every eigenvalue below `lambda_max` by their mean (trace
/// preserving), then renormalizes to a unit diagonal.
pub fn rmtm_filter(eig: &EigenDecomposition, lambda_max: f64) -> Result<RmtFiltered> {
    let noise: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l < lambda_max)
        .collect();
    let n_filtered = noise.len();
    let replacement = if noise.is_empty() {
        0.0
    } else {
        noise.iter().sum::<f64>() / n_filtered as f64
    };
    let spectrum: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < lambda_max { replacement } else { l })
        .collect();
    let h = eig.compose(&spectrum);
    let h_trace = h.trace();
    let d = h.diagonal();
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::ZeroVariance { index: i });
    }
    let scale: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let corr = SymmetricMatrix::from_fn(h.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            h.get(i, j) / (scale[i] * scale[j])
        }
    });
    Ok(RmtFiltered {
        correlation: corr,
        n_filtered,
        h_trace,
        replacement,
        clamped: false,
        diagonal_loaded: false,
    })
}

/// Output of a full-window spectral estimator.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub covariance: SymmetricMatrix,
    pub bound: RmtBound,
    /// Sample correlation spectrum, descending.
    pub eigenvalues: Vec<f64>,
    pub filter: RmtFiltered,
}

#[derive(Clone, Copy)]
enum RmtVariant {
    Zero,
    Mean,
}

fn rmt_covariance(panel: &ReturnPanel, range: Range<usize>, variant: RmtVariant) -> Result<SpectralEstimate> {
    let t = range.len();
    let sample = matrix::sample_covariance(panel, range)?;
    let (corr, stds) = cov_to_corr(&sample)?;
    let eig = eig_symmetric(&corr)?;
    let lambda1 = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let bound = rmt_bound(corr.dim(), t, lambda1)?;
    if eig.eigenvalues.iter().all(|&l| l < bound.lambda_max) && matches!(variant, RmtVariant::Zero) {
        return Err(Error::AllEigenvaluesClipped {
            lambda_max: bound.lambda_max,
            fallback: Box::new(SymmetricMatrix::from_diagonal(&sample.diagonal())),
        });
    }
    let filter = match variant {
        RmtVariant::Zero => rmt0_filter(&eig, bound.lambda_max)?,
        RmtVariant::Mean => rmtm_filter(&eig, bound.lambda_max)?,
    };
    let mut covariance = corr_to_cov(&filter.correlation, &stds)?;
    // Keep the sample variances bit-exact on the diagonal.
    for (i, v) in sample.diagonal().into_iter().enumerate() {
        covariance.set(i, i, v);
    }
    Ok(SpectralEstimate {
        covariance,
        bound,
        eigenvalues: eig.eigenvalues,
        filter,
    })
}

/// Noise eigenvalues of the sample correlation set to zero.
pub fn rmt0_covariance(panel: &ReturnPanel, range: Range<usize>) -> Result<SpectralEstimate> {
    rmt_covariance(panel, range, RmtVariant::Zero)
}

/// Noise eigenvalues of the sample correlation replaced by their mean.
pub fn rmtm_covariance(panel: &ReturnPanel, range: Range<usize>) -> Result<SpectralEstimate> {
    rmt_covariance(panel, range, RmtVariant::Mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{business_dates, synthesize_factor_panel};

    fn panel(rows: Vec<Vec<f64>>, index: Option<Vec<f64>>) -> ReturnPanel {
        let l = rows[0].len();
        let tickers = (0..rows.len()).map(|i| format!("S{i}")).collect();
        ReturnPanel::new(tickers, business_dates(l), rows, index).unwrap()
    }

    #[test]
    fn exact_regression() {
        let f = vec![0.01, -0.02, 0.015, 0.0, -0.005];
        let r: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        let p = panel(vec![r], Some(f));
        let fit = fit_single_index(&p, 0..5).unwrap();
        assert!((fit.betas[0] - 2.0).abs() < 1e-12);
        assert!(fit.idio_variances[0].abs() < 1e-18);
    }

    #[test]
    fn regression_errors() {
        let p = panel(vec![vec![0.1, 0.2, 0.3]], None);
        assert!(matches!(fit_single_index(&p, 0..3), Err(Error::MissingIndex)));
        let p = panel(vec![vec![0.1, 0.2, 0.3]], Some(vec![0.01; 3]));
        assert!(matches!(fit_single_index(&p, 0..3), Err(Error::ZeroIndexVariance)));
        let p = panel(vec![vec![0.1, 0.2, 0.3]], Some(vec![0.01, 0.02, 0.0]));
        assert!(matches!(
            fit_single_index(&p, 0..2),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn independent_asset_has_small_beta() {
        let p = synthesize_factor_panel(2, 20_000, &[0.0, 0.0], 0.01, &[0.01, 0.01], 3).unwrap();
        let fit = fit_single_index(&p, 0..20_000).unwrap();
        assert!(fit.betas.iter().all(|b| b.abs() < 0.05));
    }

    #[test]
    fn si_plug_in() {
        let fit = SingleIndexFit {
            betas: vec![1.0, 1.0],
            index_variance: 1.0,
            idio_variances: vec![1.0, 1.0],
        };
        assert_eq!(si_covariance(&fit).to_rows(), vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let fit = SingleIndexFit {
            betas: vec![0.0; 3],
            index_variance: 0.5,
            idio_variances: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(si_covariance(&fit), SymmetricMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
    }

    #[test]
    fn si_minus_d_is_rank_one() {
        let fit = SingleIndexFit {
            betas: vec![0.5, 1.2, -0.3, 2.0],
            index_variance: 0.7,
            idio_variances: vec![0.1, 0.2, 0.3, 0.4],
        };
        let s = si_covariance(&fit);
        let common = s.blend(1.0, &SymmetricMatrix::from_diagonal(&fit.idio_variances), -1.0);
        let e = eig_symmetric(&common).unwrap();
        let rank = e.eigenvalues.iter().filter(|l| l.abs() > 1e-12).count();
        assert_eq!(rank, 1);
    }

    #[test]
    fn noise_edge_values() {
        let b = rmt_bound(10, 10, 0.0).unwrap();
        assert_eq!(b.lambda_max, 4.0);
        let b = rmt_bound(90, 100, 9.0).unwrap();
        assert!((b.sigma_sq - 0.9).abs() < 1e-15);
        let b = rmt_bound(90, 250, 27.0).unwrap();
        assert!((b.sigma_sq - 0.7).abs() < 1e-15);
        assert!((b.lambda_max - 1.792).abs() < 1e-12);
        assert!(matches!(rmt_bound(5, 10, 7.0), Err(Error::InvalidLambda1 { .. })));
        assert!(matches!(rmt_bound(5, 10, -1.0), Err(Error::InvalidLambda1 { .. })));
    }

    #[test]
    fn rmt0_two_asset_keeps_market_mode() {
        let c = SymmetricMatrix::try_from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let eig = eig_symmetric(&c).unwrap();
        let f = rmt0_filter(&eig, 1.0).unwrap();
        assert_eq!(f.n_filtered, 1);
        assert!((f.correlation.get(0, 1) - 0.95).abs() < 1e-12);
        assert_eq!(f.correlation.get(0, 0), 1.0);
    }

    #[test]
    fn rmtm_mean_replacement_preserves_trace() {
        // Spectrum (2.5, 0.9, 0.6) on an arbitrary orthonormal basis.
        let basis = SymmetricMatrix::try_from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![-1.0, 1.5, 0.3],
            vec![0.5, 0.3, 1.0],
        ])
        .unwrap();
        let q = eig_symmetric(&basis).unwrap();
        let h = q.compose(&[2.5, 0.9, 0.6]);
        let eig = eig_symmetric(&h).unwrap();
        let f = rmtm_filter(&eig, 1.0).unwrap();
        assert_eq!(f.n_filtered, 2);
        assert!((f.replacement - 0.75).abs() < 1e-12);
        assert!((f.h_trace - 4.0).abs() < 1e-10);
    }

    #[test]
    fn nothing_clipped_returns_sample() {
        let p = synthesize_factor_panel(2, 400, &[1.0, 1.0], 0.01, &[0.01, 0.01], 9).unwrap();
        let s = matrix::sample_covariance(&p, 0..400).unwrap();
        let (c, _) = cov_to_corr(&s).unwrap();
        let eig = eig_symmetric(&c).unwrap();
        let bound = rmt_bound(2, 400, eig.eigenvalues[0]).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| l >= bound.lambda_max));
        let r0 = rmt0_covariance(&p, 0..400).unwrap();
        let rm = rmtm_covariance(&p, 0..400).unwrap();
        assert_eq!(r0.filter.n_filtered, 0);
        assert!(r0.covariance.max_abs_diff(&s) <= 1e-10);
        assert!(rm.covariance.max_abs_diff(&s) <= 1e-10);
    }

    #[test]
    fn rmt_outputs_keep_sample_variances() {
        let betas: Vec<f64> = (0..20).map(|i| 0.5 + 0.05 * i as f64).collect();
        let p = synthesize_factor_panel(20, 60, &betas, 0.01, &[0.015; 20], 4).unwrap();
        let s = matrix::sample_covariance(&p, 10..40).unwrap();
        for est in [rmt0_covariance(&p, 10..40).unwrap(), rmtm_covariance(&p, 10..40).unwrap()] {
            assert_eq!(est.covariance.diagonal(), s.diagonal());
            assert!(is_positive_definite(&est.covariance));
        }
        let rm = rmtm_covariance(&p, 10..40).unwrap();
        assert!((rm.filter.h_trace - 20.0).abs() < 1e-10);
    }

    #[test]
    fn all_clipped_reports_fallback() {
        // Orthogonal zero-mean series: correlation is exactly I, whose unit
        // eigenvalues sit below the edge 0.5·(1 + 0.5 + 2√0.5).
        let p = panel(
            vec![vec![1.0, -1.0, 1.0, -1.0], vec![2.0, 2.0, -2.0, -2.0]],
            None,
        );
        match rmt0_covariance(&p, 0..4) {
            Err(Error::AllEigenvaluesClipped { fallback, lambda_max }) => {
                assert!(lambda_max > 1.0);
                assert_eq!(fallback.diagonal(), vec![4.0 / 3.0, 16.0 / 3.0]);
                assert_eq!(fallback.get(0, 1), 0.0);
            }
            other => panic!("expected clipping failure, got {other:?}"),
        }
        // Averaging an all-noise spectrum is a no-op on the identity.
        let rm = rmtm_covariance(&p, 0..4).unwrap();
        assert_eq!(rm.filter.n_filtered, 2);
        assert!(rm.covariance.get(0, 1).abs() < 1e-12);
    }
}
