//! Dense symmetric matrices and the handful of numerical kernels every
//! estimator shares: sample moments, covariance/correlation rescaling,
//! a cyclic Jacobi eigensolver and the Moore–Penrose pseudoinverse.

use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnPanel;

/// Default relative threshold below which eigenvalues count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 50;

/// Dense `n × n` symmetric matrix stored row-major. Every mutation writes
/// both `(i, j)` and `(j, i)`, so the storage is symmetric bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Validating constructor: rows must be square, finite and exactly symmetric.
    pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.mul_vec(x), x)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn blend(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Dense product of two symmetric matrices (not symmetric in general).
    pub fn matmul(&self, other: &Self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = other.row(k);
                for (o, b) in out[i].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Writes the matrix as text: the dimension on the first line, then one
    /// comma-separated row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n)?;
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidDimension("empty matrix file".into()))??;
        let n: usize = header.trim().parse().map_err(|_| Error::Malformed {
            row: 0,
            column: "n".into(),
            value: header.clone(),
        })?;
        let mut rows = Vec::with_capacity(n);
        for (row, line) in lines.enumerate().take(n) {
            let line = line?;
            let parsed = line
                .split(',')
                .enumerate()
                .map(|(col, cell)| {
                    cell.trim().parse::<f64>().map_err(|_| Error::Malformed {
                        row: row + 1,
                        column: col.to_string(),
                        value: cell.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(parsed);
        }
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rows.len(),
            });
        }
        Self::try_from_rows(&rows)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows of `series` with their means removed.
pub(crate) fn centered(series: &[&[f64]]) -> Vec<Vec<f64>> {
    series
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|x| x - mean).collect()
        })
        .collect()
}

/// Unbiased (divisor `T − 1`) covariance of equally long series.
pub fn covariance_of_series(series: &[&[f64]]) -> Result<SymmetricMatrix> {
    let t = series.first().map_or(0, |s| s.len());
    if t < 2 {
        return Err(Error::DegenerateWindow {
            required: 2,
            actual: t,
        });
    }
    if let Some(bad) = series.iter().find(|s| s.len() != t) {
        return Err(Error::DimensionMismatch {
            expected: t,
            actual: bad.len(),
        });
    }
    let c = centered(series);
    let denom = (t - 1) as f64;
    Ok(SymmetricMatrix::from_fn(series.len(), |i, j| {
        dot(&c[i], &c[j]) / denom
    }))
}

/// Sample covariance of every asset in `panel` over the day range `range`.
pub fn sample_covariance(panel: &ReturnPanel, range: Range<usize>) -> Result<SymmetricMatrix> {
    if range.end > panel.n_days() {
        return Err(Error::DimensionMismatch {
            expected: panel.n_days(),
            actual: range.end,
        });
    }
    covariance_of_series(&panel.window(range.clone()))
}

/// Splits a covariance matrix into its correlation matrix and standard deviations.
pub fn cov_to_corr(cov: &SymmetricMatrix) -> Result<(SymmetricMatrix, Vec<f64>)> {
    let stds = cov
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.sqrt())
            } else {
                Err(Error::ZeroVariance { index: i })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let corr = SymmetricMatrix::from_fn(cov.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            cov.get(i, j) / (stds[i] * stds[j])
        }
    });
    Ok((corr, stds))
}

/// Rescales a correlation matrix back to covariances, `c_ij σ_i σ_j`.
pub fn corr_to_cov(corr: &SymmetricMatrix, stds: &[f64]) -> Result<SymmetricMatrix> {
    if stds.len() != corr.dim() {
        return Err(Error::DimensionMismatch {
            expected: corr.dim(),
            actual: stds.len(),
        });
    }
    if let Some(i) = stds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::ZeroVariance { index: i });
    }
    Ok(SymmetricMatrix::from_fn(corr.dim(), |i, j| {
        if i == j {
            stds[i] * stds[i]
        } else {
            corr.get(i, j) * stds[i] * stds[j]
        }
    }))
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row `k` holds the eigenvector of `eigenvalues[k]`.
    vectors: Vec<f64>,
    n: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// `Σ_k values[k] v_k v_kᵀ`; zero values are skipped.
    pub fn compose(&self, values: &[f64]) -> SymmetricMatrix {
        assert_eq!(values.len(), self.n, "dimension mismatch");
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (k, &lambda) in values.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let v = self.eigenvector(k);
            for i in 0..n {
                let vi = lambda * v[i];
                if vi == 0.0 {
                    continue;
                }
                let row = &mut out[i * n..(i + 1) * n];
                for (o, vj) in row.iter_mut().zip(v) {
                    *o += vi * vj;
                }
            }
        }
        // Symmetrize roundoff by copying the upper triangle.
        SymmetricMatrix::from_fn(n, |i, j| out[i * n + j])
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.compose(&self.eigenvalues)
    }

    /// Largest deviation of `QᵀQ` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in a..self.n {
                let d = dot(self.eigenvector(a), self.eigenvector(b));
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖A‖_F`; fails with [`Error::NoConvergence`] after 50 sweeps.
/// Equal eigenvalues keep the order of their diagonal positions.
pub fn eig_symmetric(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let mut m = a.data.clone();
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let tol = JACOBI_REL_TOL * a.frobenius_norm();
    let skip = tol / n.max(1) as f64;

    let mut converged = false;
    for _sweep in 0..=JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= skip {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y * n + y].total_cmp(&m[x * n + x]));
    let eigenvalues = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&vt[k * n..(k + 1) * n]);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
        n,
    })
}

/// Moore–Penrose pseudoinverse of a symmetric PSD matrix. Eigenvalues at or
/// below `rank_tol · λ_max` are treated as exact zeros.
pub fn pseudoinverse(a: &SymmetricMatrix, rank_tol: f64) -> Result<SymmetricMatrix> {
    let eig = eig_symmetric(a)?;
    Ok(pseudoinverse_from(&eig, rank_tol))
}

pub(crate) fn pseudoinverse_from(eig: &EigenDecomposition, rank_tol: f64) -> SymmetricMatrix {
    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if !(lambda_max > 0.0) {
        return SymmetricMatrix::zeros(eig.dim());
    }
    let cutoff = rank_tol * lambda_max;
    let inverted: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > cutoff { 1.0 / l } else { 0.0 })
        .collect();
    eig.compose(&inverted)
}

/// Lower-triangular Cholesky factor, or `None` when a pivot is not
/// comfortably positive.
pub(crate) fn cholesky(a: &SymmetricMatrix) -> Option<Vec<f64>> {
    let n = a.dim();
    let scale = a.diagonal().into_iter().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let floor = scale * f64::EPSILON * n as f64;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Cheap positive-definiteness test through a Cholesky attempt.
pub fn is_positive_definite(a: &SymmetricMatrix) -> bool {
    cholesky(a).is_some()
}

/// Smallest eigenvalue (Jacobi); used for diagnostics and tests.
pub fn min_eigenvalue(a: &SymmetricMatrix) -> Result<f64> {
    Ok(eig_symmetric(a)?
        .eigenvalues
        .last()
        .copied()
        .unwrap_or(0.0))
}

/// Raises eigenvalues below `floor` to `floor` and rescales the result to a
/// unit diagonal. Used to repair filtered correlation matrices that lost
/// positive definiteness.
pub fn load_correlation(corr: &SymmetricMatrix, floor: f64) -> Result<SymmetricMatrix> {
    let eig = eig_symmetric(corr)?;
    let lifted: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(floor)).collect();
    let h = eig.compose(&lifted);
    let d: Vec<f64> = h.diagonal().iter().map(|x| x.sqrt()).collect();
    Ok(SymmetricMatrix::from_fn(h.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            h.get(i, j) / (d[i] * d[j])
        }
    }))
}
