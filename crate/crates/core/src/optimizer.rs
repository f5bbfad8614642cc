//! Global-minimum-variance portfolios: the closed form (through the
//! pseudoinverse when the covariance is singular), the two-multiplier
//! efficient frontier, and a primal active-set solver for the long-only case.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorId;
use crate::matrix::{dot, eig_symmetric, pseudoinverse_from, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    Unconstrained,
    LongOnly,
}

impl ConstraintMode {
    pub const ALL: [ConstraintMode; 2] = [ConstraintMode::Unconstrained, ConstraintMode::LongOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Unconstrained => "unconstrained",
            ConstraintMode::LongOnly => "long_only",
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

/// Fully invested weights and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub weights: Vec<f64>,
    pub constraint_mode: ConstraintMode,
    pub estimator_id: Option<EstimatorId>,
    /// Working-set changes (long-only) or zero (closed form).
    pub iterations: usize,
    /// Largest violation of the first-order conditions.
    pub kkt_residual: f64,
}

impl PortfolioWeights {
    pub fn variance(&self, cov: &SymmetricMatrix) -> f64 {
        cov.quad_form(&self.weights)
    }
}

fn renormalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
}

/// Stationarity residual: spread of the marginal risks `(2Sw)_i` over the
/// names in `support` around their mean, plus any name outside the support
/// whose marginal risk undercuts that mean.
fn kkt_residual(cov: &SymmetricMatrix, w: &[f64], support: &[bool]) -> f64 {
    let g: Vec<f64> = cov.mul_vec(w).into_iter().map(|x| 2.0 * x).collect();
    let (sum, count) = g
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .fold((0.0, 0usize), |(s, c), (gi, _)| (s + gi, c + 1));
    if count == 0 {
        return 0.0;
    }
    let mu = sum / count as f64;
    g.iter().zip(support).fold(0.0, |worst: f64, (gi, &s)| {
        if s {
            worst.max((gi - mu).abs())
        } else {
            worst.max(mu - gi)
        }
    })
}

/// `w = S⁺1 / (1ᵀS⁺1)`; the pseudoinverse is the ordinary inverse when every
/// eigenvalue exceeds `rank_tol · λ_max`.
///
/// For singular `S` the minimum-variance problem has infinitely many
/// solutions and this returns the pseudoinverse representative.
pub fn gmv_unconstrained(cov: &SymmetricMatrix, rank_tol: f64) -> Result<PortfolioWeights> {
    let n = cov.dim();
    let eig = eig_symmetric(cov)?;
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let pinv = pseudoinverse_from(&eig, rank_tol);
    let x = pinv.mul_vec(&vec![1.0; n]);
    let denom: f64 = x.iter().sum();
    if !(lambda_max > 0.0) || !(denom > 1e-14 * n as f64 / lambda_max) {
        return Err(Error::DegenerateDenominator { value: denom });
    }
    let mut weights: Vec<f64> = x.iter().map(|v| v / denom).collect();
    renormalize(&mut weights);
    let residual = kkt_residual(cov, &weights, &vec![true; n]);
    Ok(PortfolioWeights {
        weights,
        constraint_mode: ConstraintMode::Unconstrained,
        estimator_id: None,
        iterations: 0,
        kkt_residual: residual,
    })
}

/// Closed-form efficient-frontier portfolio for target mean `r_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficientFrontierSolution {
    pub lambda: f64,
    pub gamma: f64,
    /// `1ᵀΣ⁻¹1`
    pub a: f64,
    /// `1ᵀΣ⁻¹m`
    pub b: f64,
    /// `mᵀΣ⁻¹m`
    pub c: f64,
    /// `AC − B²`
    pub delta: f64,
    pub weights: Vec<f64>,
}

pub fn frontier_solution(
    cov: &SymmetricMatrix,
    means: &[f64],
    target_return: f64,
    rank_tol: f64,
) -> Result<EfficientFrontierSolution> {
    let n = cov.dim();
    if means.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: means.len(),
        });
    }
    let eig = eig_symmetric(cov)?;
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let lambda_min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if !(lambda_max > 0.0) || lambda_min <= rank_tol * lambda_max {
        return Err(Error::SingularCovariance);
    }
    let inv = pseudoinverse_from(&eig, rank_tol);
    let inv_ones = inv.mul_vec(&vec![1.0; n]);
    let inv_m = inv.mul_vec(means);
    let a: f64 = inv_ones.iter().sum();
    let b: f64 = inv_m.iter().sum();
    let c = dot(means, &inv_m);
    let delta = a * c - b * b;
    if !(delta > 1e-12 * (a * c).abs()) {
        return Err(Error::DegenerateFrontier);
    }
    let lambda = (c - target_return * b) / delta;
    let gamma = (target_return * a - b) / delta;
    let weights = inv_ones
        .iter()
        .zip(&inv_m)
        .map(|(o, m)| lambda * o + gamma * m)
        .collect();
    Ok(EfficientFrontierSolution {
        lambda,
        gamma,
        a,
        b,
        c,
        delta,
        weights,
    })
}

/// Solves `M x = rhs` by Gaussian elimination with complete pivoting,
/// treating pivots below `rel_tol · max|M|` as zero and setting the
/// corresponding unknowns to zero. Returns a solution of the consistent
/// system even when `M` is singular.
fn solve_rank_revealing(mut m: Vec<f64>, mut rhs: Vec<f64>, size: usize, rel_tol: f64) -> Vec<f64> {
    let scale = m.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let tol = rel_tol * scale;
    let mut col_perm: Vec<usize> = (0..size).collect();
    let mut rank = size;
    for k in 0..size {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for r in k..size {
            for c in k..size {
                let v = m[r * size + c].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= tol {
            rank = k;
            break;
        }
        if pr != k {
            for c in 0..size {
                m.swap(k * size + c, pr * size + c);
            }
            rhs.swap(k, pr);
        }
        if pc != k {
            for r in 0..size {
                m.swap(r * size + k, r * size + pc);
            }
            col_perm.swap(k, pc);
        }
        let pivot = m[k * size + k];
        for r in (k + 1)..size {
            let f = m[r * size + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in k..size {
                m[r * size + c] -= f * m[k * size + c];
            }
            rhs[r] -= f * rhs[k];
        }
    }
    let mut y = vec![0.0; size];
    for k in (0..rank).rev() {
        let mut s = rhs[k];
        for c in (k + 1)..rank {
            s -= m[k * size + c] * y[c];
        }
        y[k] = s / m[k * size + k];
    }
    let mut x = vec![0.0; size];
    for (k, &orig) in col_perm.iter().enumerate() {
        x[orig] = y[k];
    }
    x
}

/// Minimizes `wᵀSw` subject to `Σw = 1`, `w ≥ 0` with a primal active-set
/// method started from equal weights.
///
/// Each iteration solves the equality-constrained subproblem on the free
/// names; a blocked step pins the blocking name to zero, an unblocked one
/// releases the pinned name with the most negative multiplier. Singular `S`
/// is fine: the subproblem solve returns some minimizer.
pub fn gmv_long_only(cov: &SymmetricMatrix) -> Result<PortfolioWeights> {
    let n = cov.dim();
    if n == 0 {
        return Err(Error::InvalidDimension("empty covariance matrix".into()));
    }
    let limit = 100 * n;
    let diag_scale = cov.diagonal().into_iter().fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let mult_tol = 1e-10 * 2.0 * diag_scale;
    const STEP_TOL: f64 = 1e-13;

    let mut w = vec![1.0 / n as f64; n];
    let mut pinned = vec![false; n];
    let mut changes = 0usize;

    loop {
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        let m = free.len();
        let g: Vec<f64> = cov.mul_vec(&w).into_iter().map(|x| 2.0 * x).collect();

        // [2S_FF 1; 1ᵀ 0] [p; ν] = [−g_F; 0]
        let size = m + 1;
        let mut kkt = vec![0.0; size * size];
        for (a, &i) in free.iter().enumerate() {
            let row = cov.row(i);
            for (b, &j) in free.iter().enumerate() {
                kkt[a * size + b] = 2.0 * row[j];
            }
            kkt[a * size + m] = 1.0;
            kkt[m * size + a] = 1.0;
        }
        let mut rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        rhs.push(0.0);
        let sol = solve_rank_revealing(kkt, rhs, size, 1e-13);
        let p = &sol[..m];

        let step_norm = p.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if step_norm <= STEP_TOL {
            // Stationary on the free set: check multipliers of pinned names.
            let mu = free.iter().map(|&i| g[i]).sum::<f64>() / m as f64;
            let release = (0..n)
                .filter(|&i| pinned[i])
                .map(|i| (i, g[i] - mu))
                .filter(|&(_, lam)| lam < -mult_tol)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            match release {
                None => break,
                Some((i, _)) => {
                    pinned[i] = false;
                    changes += 1;
                }
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                if p[a] < -STEP_TOL {
                    let ratio = w[i] / -p[a];
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                w[i] += alpha * p[a];
            }
            if let Some(i) = blocking {
                w[i] = 0.0;
                pinned[i] = true;
                changes += 1;
            }
        }
        if changes > limit {
            return Err(Error::MaxIterations { limit });
        }
    }

    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    renormalize(&mut w);
    let support: Vec<bool> = w.iter().map(|&x| x > 0.0).collect();
    let residual = kkt_residual(cov, &w, &support);
    Ok(PortfolioWeights {
        weights: w,
        constraint_mode: ConstraintMode::LongOnly,
        estimator_id: None,
        iterations: changes,
        kkt_residual: residual,
    })
}

/// Dispatches on the constraint mode.
pub fn gmv(cov: &SymmetricMatrix, mode: ConstraintMode, rank_tol: f64) -> Result<PortfolioWeights> {
    match mode {
        ConstraintMode::Unconstrained => gmv_unconstrained(cov, rank_tol),
        ConstraintMode::LongOnly => gmv_long_only(cov),
    }
}
