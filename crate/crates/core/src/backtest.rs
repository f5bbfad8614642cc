//! Rolling out-of-sample comparison of the estimators: estimate on one
//! window, optimize, hold for an equally long window, measure.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorId};
use crate::market_data::{make_windows, ReturnPanel, WindowPair, STANDARD_HORIZONS};
use crate::matrix::{self, SymmetricMatrix, DEFAULT_RANK_TOL};
use crate::optimizer::{gmv, ConstraintMode};
use crate::stats::{mean, paired_t_test, standard_error, TTest};

pub const DEFAULT_DAYS_PER_YEAR: f64 = 252.0;
pub const DEFAULT_Q: f64 = 0.9;

/// Daily variance to annualized volatility in percent.
pub fn annualized_risk(daily_variance: f64, days_per_year: f64) -> f64 {
    (daily_variance.max(0.0) * days_per_year).sqrt() * 100.0
}

/// `√(wᵀSw)` annualized, for the covariance the weights were chosen on.
pub fn predicted_risk(weights: &[f64], cov: &SymmetricMatrix, days_per_year: f64) -> f64 {
    annualized_risk(cov.quad_form(weights), days_per_year)
}

/// `√(wᵀŜw)` annualized, `Ŝ` the sample covariance over `holding`.
pub fn realized_risk(weights: &[f64], panel: &ReturnPanel, holding: Range<usize>) -> Result<f64> {
    let ex_post = matrix::sample_covariance(panel, holding)?;
    Ok(annualized_risk(ex_post.quad_form(weights), DEFAULT_DAYS_PER_YEAR))
}

/// Inverse participation ratio `1/Σw²`.
pub fn n_eff(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Smallest number of names whose absolute weights reach a fraction `q` of
/// the total absolute weight. The comparison allows a relative slack of
/// 1e-12 so that e.g. nine of ten equal weights count as 90%.
pub fn n_q(weights: &[f64], q: f64) -> usize {
    let mut abs: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = abs.iter().sum();
    let target = q * total - 1e-12 * total;
    let mut acc = 0.0;
    for (k, a) in abs.iter().enumerate() {
        acc += a;
        if acc >= target {
            return k + 1;
        }
    }
    abs.len()
}

/// Total short exposure over total long exposure.
pub fn short_ratio(weights: &[f64]) -> f64 {
    let (neg, pos) = weights.iter().fold((0.0, 0.0), |(n, p), &w| {
        if w < 0.0 {
            (n - w, p)
        } else {
            (n, p + w)
        }
    });
    if neg == 0.0 {
        0.0
    } else {
        neg / pos
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub estimators: Vec<EstimatorId>,
    pub horizons: Vec<usize>,
    pub modes: Vec<ConstraintMode>,
    /// Coverage fraction for the concentration count `N_q`.
    pub q: f64,
    pub days_per_year: f64,
    /// Extra window passes as `(horizon, offset)`; their windows pool into
    /// the same cells as the offset-0 pass.
    pub restarts: Vec<(usize, usize)>,
    pub rank_tol: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            estimators: EstimatorId::ALL.to_vec(),
            horizons: STANDARD_HORIZONS.to_vec(),
            modes: ConstraintMode::ALL.to_vec(),
            q: DEFAULT_Q,
            days_per_year: DEFAULT_DAYS_PER_YEAR,
            restarts: vec![(500, 250)],
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if self.estimators.is_empty() {
            return bad("estimators", "at least one estimator is required");
        }
        if self.horizons.is_empty() {
            return bad("horizons", "at least one horizon is required");
        }
        if self.horizons.iter().any(|&h| h < 3) {
            return bad("horizons", "every horizon must be at least 3 days");
        }
        if self.modes.is_empty() {
            return bad("modes", "at least one constraint mode is required");
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad("q", "must lie in (0, 1]");
        }
        if !(self.days_per_year > 0.0) {
            return bad("days_per_year", "must be positive");
        }
        Ok(())
    }

    /// Every window pair per horizon, offset-0 pass first, then restarts,
    /// sorted by rebalancing day.
    pub fn windows(&self, n_days: usize) -> Result<Vec<(usize, WindowPair)>> {
        let mut out = Vec::new();
        let mut horizons = self.horizons.clone();
        horizons.sort_unstable();
        horizons.dedup();
        for &h in &horizons {
            let mut pairs = make_windows(n_days, h, 0)?;
            for &(rh, offset) in &self.restarts {
                if rh == h && offset > 0 {
                    pairs.extend(make_windows(n_days, h, offset)?);
                }
            }
            pairs.sort_by_key(|p| p.t0);
            pairs.dedup_by_key(|p| p.t0);
            out.extend(pairs.into_iter().map(|p| (h, p)));
        }
        Ok(out)
    }
}

/// Metrics of one (estimator, mode, horizon, window) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub estimator: EstimatorId,
    pub mode: ConstraintMode,
    pub horizon: usize,
    pub t0: usize,
    pub predicted_risk: f64,
    pub realized_risk: f64,
    pub reliability_abs: f64,
    pub reliability_rel: f64,
    pub n_eff: f64,
    pub n_q: usize,
    pub short_ratio: f64,
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub estimator: EstimatorId,
    pub mode: ConstraintMode,
    pub horizon: usize,
    pub t0: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over √n; NaN below two windows.
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            se: standard_error(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: EstimatorId,
    pub mode: ConstraintMode,
    pub horizon: usize,
    pub n_windows: usize,
    pub n_failed: usize,
    pub predicted_risk: MeanSe,
    pub realized_risk: MeanSe,
    /// `1 − ŝ/ŝᴹ` against the sample-covariance baseline, over paired windows.
    pub relative_risk: Option<MeanSe>,
    pub reliability_abs: MeanSe,
    pub reliability_rel: MeanSe,
    pub n_eff: MeanSe,
    pub n_q: MeanSe,
    pub short_ratio: MeanSe,
    pub alpha: Option<MeanSe>,
    /// Test of `ŝᴹ − ŝ`.
    pub risk_test: Option<TTest>,
    /// Test of `|ŝᴹ − sᴹ| − |ŝ − s|`.
    pub reliability_test: Option<TTest>,
    /// Test of `N_eff − N_effᴹ`.
    pub n_eff_test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub n_assets: usize,
    pub n_days: usize,
    pub results: Vec<WindowResult>,
    pub failures: Vec<WindowFailure>,
    pub summaries: Vec<CellSummary>,
}

fn mode_rank(m: ConstraintMode) -> usize {
    ConstraintMode::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

type CellKey = (usize, usize, usize); // (mode rank, horizon, estimator rank)

/// Aggregates window results into per-cell summaries, ordered by mode,
/// horizon and estimator group. Relative columns and tests are present only
/// when the baseline ran in the same (mode, horizon).
pub fn summarize(results: &[WindowResult], failures: &[WindowFailure]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<CellKey, (EstimatorId, ConstraintMode, Vec<&WindowResult>, usize)> =
        BTreeMap::new();
    for r in results {
        let key = (mode_rank(r.mode), r.horizon, r.estimator.rank());
        let cell = cells
            .entry(key)
            .or_insert_with(|| (r.estimator, r.mode, Vec::new(), 0));
        cell.2.push(r);
    }
    for f in failures {
        let key = (mode_rank(f.mode), f.horizon, f.estimator.rank());
        cells
            .entry(key)
            .or_insert_with(|| (f.estimator, f.mode, Vec::new(), 0))
            .3 += 1;
    }

    let baseline_rank = EstimatorId::Markowitz.rank();
    let baselines: BTreeMap<(usize, usize), BTreeMap<usize, &WindowResult>> = cells
        .iter()
        .filter(|(k, _)| k.2 == baseline_rank)
        .map(|(k, (_, _, rs, _))| ((k.0, k.1), rs.iter().map(|r| (r.t0, *r)).collect()))
        .collect();

    cells
        .into_iter()
        .map(|((mr, horizon, _), (estimator, mode, mut rs, n_failed))| {
            rs.sort_by_key(|r| r.t0);
            let col = |f: fn(&WindowResult) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            let alphas: Vec<f64> = rs.iter().filter_map(|r| r.alpha).collect();

            let mut relative_risk = None;
            let (mut risk_test, mut reliability_test, mut n_eff_test) = (None, None, None);
            if let Some(base) = baselines.get(&(mr, horizon)) {
                let paired: Vec<(&WindowResult, &WindowResult)> = rs
                    .iter()
                    .filter_map(|r| base.get(&r.t0).map(|b| (*r, *b)))
                    .collect();
                if !paired.is_empty() {
                    let rel: Vec<f64> = paired
                        .iter()
                        .map(|(r, b)| 1.0 - r.realized_risk / b.realized_risk)
                        .collect();
                    relative_risk = Some(MeanSe::of(&rel));
                    let risk: Vec<f64> = paired.iter().map(|(r, b)| b.realized_risk - r.realized_risk).collect();
                    let rel_diff: Vec<f64> = paired
                        .iter()
                        .map(|(r, b)| b.reliability_abs - r.reliability_abs)
                        .collect();
                    let neff: Vec<f64> = paired.iter().map(|(r, b)| r.n_eff - b.n_eff).collect();
                    risk_test = paired_t_test(&risk).ok();
                    reliability_test = paired_t_test(&rel_diff).ok();
                    n_eff_test = paired_t_test(&neff).ok();
                }
            }

            CellSummary {
                estimator,
                mode,
                horizon,
                n_windows: rs.len(),
                n_failed,
                predicted_risk: MeanSe::of(&col(|r| r.predicted_risk)),
                realized_risk: MeanSe::of(&col(|r| r.realized_risk)),
                relative_risk,
                reliability_abs: MeanSe::of(&col(|r| r.reliability_abs)),
                reliability_rel: MeanSe::of(&col(|r| r.reliability_rel)),
                n_eff: MeanSe::of(&col(|r| r.n_eff)),
                n_q: MeanSe::of(&col(|r| r.n_q as f64)),
                short_ratio: MeanSe::of(&col(|r| r.short_ratio)),
                alpha: (!alphas.is_empty()).then(|| MeanSe::of(&alphas)),
                risk_test,
                reliability_test,
                n_eff_test,
            }
        })
        .collect()
}

/// Runs every estimator on one window and solves every requested mode.
fn run_window(
    panel: &ReturnPanel,
    config: &BacktestConfig,
    horizon: usize,
    window: &WindowPair,
    estimator: EstimatorId,
    ex_post: &SymmetricMatrix,
) -> Vec<std::result::Result<WindowResult, WindowFailure>> {
    let fail = |mode, reason: String| WindowFailure {
        estimator,
        mode,
        horizon,
        t0: window.t0,
        reason,
    };
    let est = match estimate(estimator, panel, window.estimation.clone()) {
        Ok(e) => e,
        Err(e) => {
            log::warn!("{estimator} T={horizon} t0={}: {e}", window.t0);
            return config.modes.iter().map(|&m| Err(fail(m, e.to_string()))).collect();
        }
    };
    config
        .modes
        .iter()
        .map(|&mode| {
            let w = gmv(&est.matrix, mode, config.rank_tol).map_err(|e| {
                log::warn!("{estimator} {mode} T={horizon} t0={}: {e}", window.t0);
                fail(mode, e.to_string())
            })?;
            let s = predicted_risk(&w.weights, &est.matrix, config.days_per_year);
            let s_hat = annualized_risk(ex_post.quad_form(&w.weights), config.days_per_year);
            let gap = (s_hat - s).abs();
            Ok(WindowResult {
                estimator,
                mode,
                horizon,
                t0: window.t0,
                predicted_risk: s,
                realized_risk: s_hat,
                reliability_abs: gap,
                reliability_rel: gap / s_hat,
                n_eff: n_eff(&w.weights),
                n_q: n_q(&w.weights, config.q),
                short_ratio: short_ratio(&w.weights),
                alpha: est.diagnostics.alpha,
                iterations: w.iterations,
                kkt_residual: w.kkt_residual,
                weights: w.weights,
            })
        })
        .collect()
}

/// Runs the whole campaign. Work is spread over a pool of `workers` threads
/// (all cores when `None`); the report does not depend on the pool size.
pub fn run_backtest(panel: &ReturnPanel, config: &BacktestConfig, workers: Option<usize>) -> Result<BacktestReport> {
    config.validate()?;
    if config.estimators.iter().any(|e| e.needs_index()) && panel.index_returns().is_none() {
        return Err(Error::MissingIndex);
    }
    let windows = config.windows(panel.n_days())?;
    let tasks: Vec<(usize, &WindowPair, EstimatorId)> = windows
        .iter()
        .flat_map(|(h, w)| config.estimators.iter().map(move |&e| (*h, w, e)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers".into(),
            reason: e.to_string(),
        })?;
    let outcomes: Vec<Vec<std::result::Result<WindowResult, WindowFailure>>> = pool.install(|| {
        windows
            .par_iter()
            .map(|(_, w)| matrix::sample_covariance(panel, w.holding.clone()))
            .collect::<Result<Vec<_>>>()
            .map(|ex_post| {
                let by_t0: BTreeMap<(usize, usize), &SymmetricMatrix> = windows
                    .iter()
                    .zip(&ex_post)
                    .map(|((h, w), s)| ((*h, w.t0), s))
                    .collect();
                tasks
                    .par_iter()
                    .map(|&(h, w, e)| run_window(panel, config, h, w, e, by_t0[&(h, w.t0)]))
                    .collect()
            })
    })?;

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    results.sort_by_key(|r| (r.estimator.rank(), r.horizon, mode_rank(r.mode), r.t0));
    failures.sort_by_key(|f| (f.estimator.rank(), f.horizon, mode_rank(f.mode), f.t0));
    let summaries = summarize(&results, &failures);
    Ok(BacktestReport {
        config: config.clone(),
        n_assets: panel.n_assets(),
        n_days: panel.n_days(),
        results,
        failures,
        summaries,
    })
}
