//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use covlab::cluster::Dendrogram;
use covlab::market_data::{business_dates, ReturnPanel};
use covlab::SymmetricMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Correlation matrix `G Gᵀ` of `n` random unit vectors in `dim` dimensions.
/// With `nonnegative` the vector components are drawn from [0, 1).
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize, dim: usize, nonnegative: bool) -> SymmetricMatrix {
    let vecs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim)
                .map(|_| {
                    if nonnegative {
                        rng.random::<f64>()
                    } else {
                        rng.sample::<f64, _>(StandardNormal) + 0.5
                    }
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    SymmetricMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum()
        }
    })
}

/// Random PSD matrix `B Bᵀ` with `B` of shape `n × rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymmetricMatrix {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..rank).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    SymmetricMatrix::from_fn(n, |i, j| b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum())
}

/// Panel of i.i.d. returns, optionally with a common factor and an index.
pub fn random_panel(rng: &mut ChaCha8Rng, n: usize, t: usize, factor_weight: f64) -> ReturnPanel {
    let f: Vec<f64> = (0..t).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let beta = factor_weight * (0.5 + rng.random::<f64>());
            let vol = 0.01 + 0.02 * rng.random::<f64>();
            f.iter()
                .map(|x| beta * x + vol * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let tickers = (0..n).map(|i| format!("X{i}")).collect();
    ReturnPanel::new(tickers, business_dates(t), rows, Some(f)).unwrap()
}

/// For every pair, walk the merge list from the start and take the
/// (monotone-clamped) similarity of the first merge that joins them.
pub fn brute_force_filtered(d: &Dendrogram) -> Vec<Vec<f64>> {
    let n = d.n_leaves;
    // Clamp: a merge cannot be more similar than any merge beneath it.
    let mut clamped = Vec::new();
    for (k, m) in d.merges.iter().enumerate() {
        let mut s = m.similarity;
        for (j, earlier) in d.merges[..k].iter().enumerate() {
            let inside = earlier.members.iter().all(|x| m.members.contains(x));
            if inside {
                s = s.min(clamped[j]);
            }
        }
        clamped.push(s);
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                out[i][j] = 1.0;
                continue;
            }
            for (k, m) in d.merges.iter().enumerate() {
                if m.members.contains(&i) && m.members.contains(&j) {
                    out[i][j] = clamped[k];
                    break;
                }
            }
        }
    }
    out
}

/// Dense inverse by Gauss–Jordan with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let src = m[c].clone();
                for (v, s) in m[r].iter_mut().zip(&src) {
                    *v -= f * s;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Pseudoinverse as `U (UᵀSU)⁻¹ Uᵀ` with `U` an orthonormal basis of the
/// column space found by Gram–Schmidt.
pub fn gram_schmidt_pseudoinverse(s: &SymmetricMatrix, tol: f64) -> Vec<Vec<f64>> {
    let n = s.dim();
    let scale = s.max_abs();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in 0..n {
        let mut v: Vec<f64> = (0..n).map(|r| s.get(r, c)).collect();
        for _ in 0..2 {
            for u in &basis {
                let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= d * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > tol * scale {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let k = basis.len();
    let su: Vec<Vec<f64>> = basis.iter().map(|u| s.mul_vec(u)).collect();
    let reduced: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| basis[a].iter().zip(&su[b]).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let inv = dense_inverse(&reduced);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = 0.0;
                    for a in 0..k {
                        for b in 0..k {
                            acc += basis[a][i] * inv[a][b] * basis[b][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Minimum of `wᵀSw` over the 3-asset simplex on a grid of step `1/steps`.
pub fn simplex_grid_min3(s: &SymmetricMatrix, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        for b in 0..=(steps - a) {
            let w = [
                a as f64 / steps as f64,
                b as f64 / steps as f64,
                (steps - a - b) as f64 / steps as f64,
            ];
            best = best.min(s.quad_form(&w));
        }
    }
    best
}
