//! Agglomerative clustering of correlation matrices and the ultrametric
//! filtered correlation read off the resulting dendrogram.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnPanel;
use crate::matrix::{self, cov_to_corr, corr_to_cov, is_positive_definite, load_correlation, SymmetricMatrix};
use crate::spectral::LOADING_EPSILON;

/// Rule for the similarity between a freshly merged cluster and the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Size-weighted average of the two children's similarities.
    Upgma,
    /// Plain average of the two children's similarities.
    Wpgma,
    /// Min/max composition over raw pairwise correlations.
    Hausdorff,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Upgma, Linkage::Wpgma, Linkage::Hausdorff];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Upgma => "upgma",
            Linkage::Wpgma => "wpgma",
            Linkage::Hausdorff => "hausdorff",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Linkage::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "linkage".into(),
                reason: format!("unknown linkage `{s}`"),
            })
    }
}

/// One agglomeration step. Leaves are ids `0..n`; merge `k` creates id `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub similarity: f64,
    pub id: usize,
    /// Sorted leaf indices of the new cluster.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// True when no merge is more similar than one of its children.
    pub fn is_monotone(&self) -> bool {
        let n = self.n_leaves;
        self.merges.iter().all(|m| {
            [m.left, m.right]
                .into_iter()
                .filter(|&c| c >= n)
                .all(|c| self.merges[c - n].similarity >= m.similarity)
        })
    }

    /// Merge list as `left,right,similarity,id,size` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["left", "right", "similarity", "id", "size"])?;
        for m in &self.merges {
            out.write_record([
                m.left.to_string(),
                m.right.to_string(),
                m.similarity.to_string(),
                m.id.to_string(),
                m.members.len().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Greedy agglomeration: repeatedly merge the most similar pair of clusters.
/// Exact ties go to the lexicographically smallest `(id, id)` pair.
pub fn cluster(corr: &SymmetricMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = corr.dim();
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "clustering needs at least 2 elements, got {n}"
        )));
    }
    let cap = 2 * n - 1;
    let mut sim = vec![f64::NAN; cap * cap];
    for i in 0..n {
        for j in 0..n {
            sim[i * cap + j] = corr.get(i, j);
        }
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ia, &a) in active.iter().enumerate() {
            for &b in &active[ia + 1..] {
                let s = sim[a * cap + b];
                if best.is_none_or(|(_, _, bs)| s > bs) {
                    best = Some((a, b, s));
                }
            }
        }
        let (a, b, s) = best.expect("at least two active clusters");
        let id = n + step;
        let mut joined = [members[a].as_slice(), members[b].as_slice()].concat();
        joined.sort_unstable();
        active.retain(|&c| c != a && c != b);

        let (na, nb) = (members[a].len() as f64, members[b].len() as f64);
        for &f in &active {
            let value = match linkage {
                Linkage::Upgma => upgma_update(na, nb, sim[a * cap + f], sim[b * cap + f]),
                Linkage::Wpgma => wpgma_update(sim[a * cap + f], sim[b * cap + f]),
                Linkage::Hausdorff => hausdorff_similarity(corr, &joined, &members[f]),
            };
            sim[id * cap + f] = value;
            sim[f * cap + id] = value;
        }
        active.push(id);
        members.push(joined.clone());
        merges.push(Merge {
            left: a,
            right: b,
            similarity: s,
            id,
            members: joined,
        });
    }
    Ok(Dendrogram {
        n_leaves: n,
        linkage,
        merges,
    })
}

/// Similarity of `L = A ∪ B` to `F`, weighted by cluster sizes.
pub fn upgma_update(size_a: f64, size_b: f64, rho_af: f64, rho_bf: f64) -> f64 {
    (size_a * rho_af + size_b * rho_bf) / (size_a + size_b)
}

/// Similarity of `L = A ∪ B` to `F`, ignoring cluster sizes.
pub fn wpgma_update(rho_af: f64, rho_bf: f64) -> f64 {
    0.5 * (rho_af + rho_bf)
}

/// `min{ min_{i∈L} max_{j∈F} ρ_ij , max_{i∈L} min_{j∈F} ρ_ij }` on raw correlations.
pub fn hausdorff_similarity(corr: &SymmetricMatrix, l: &[usize], f: &[usize]) -> f64 {
    let mut min_of_max = f64::INFINITY;
    let mut max_of_min = f64::NEG_INFINITY;
    for &i in l {
        let row = corr.row(i);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &j in f {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        min_of_max = min_of_max.min(hi);
        max_of_min = max_of_min.max(lo);
    }
    min_of_max.min(max_of_min)
}

/// Correlation matrix whose `(i, j)` entry is the similarity at which `i`
/// and `j` first share a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredCorrelation {
    pub matrix: SymmetricMatrix,
    pub linkage: Linkage,
    /// Some merge similarities were lowered to restore monotonicity.
    pub reversal_fixed: bool,
    /// Eigenvalues were floored because negative entries broke definiteness.
    pub diagonal_loaded: bool,
}

/// Merge similarities with reversals removed: each node takes the minimum of
/// its own similarity and its (already clamped) children's.
pub fn monotone_similarities(d: &Dendrogram) -> Vec<f64> {
    let n = d.n_leaves;
    let mut out: Vec<f64> = Vec::with_capacity(d.merges.len());
    for m in &d.merges {
        let mut s = m.similarity;
        for child in [m.left, m.right] {
            if child >= n {
                s = s.min(out[child - n]);
            }
        }
        out.push(s);
    }
    out
}

pub fn filtered_correlation(d: &Dendrogram) -> Result<FilteredCorrelation> {
    let n = d.n_leaves;
    let sims = monotone_similarities(d);
    let reversal_fixed = sims
        .iter()
        .zip(&d.merges)
        .any(|(s, m)| *s != m.similarity);
    if reversal_fixed {
        log::debug!("{}: dendrogram reversals clamped", d.linkage);
    }

    let leaves = |id: usize| -> Vec<usize> {
        if id < n {
            vec![id]
        } else {
            d.merges[id - n].members.clone()
        }
    };
    let mut matrix = SymmetricMatrix::identity(n);
    for (m, &s) in d.merges.iter().zip(&sims) {
        let s = s.clamp(-1.0, 1.0);
        for i in leaves(m.left) {
            for j in leaves(m.right) {
                matrix.set(i, j, s);
            }
        }
    }

    let mut diagonal_loaded = false;
    if !is_positive_definite(&matrix) {
        log::warn!("{}: filtered correlation not positive definite, loading diagonal", d.linkage);
        matrix = load_correlation(&matrix, LOADING_EPSILON)?;
        diagonal_loaded = true;
    }
    Ok(FilteredCorrelation {
        matrix,
        linkage: d.linkage,
        reversal_fixed,
        diagonal_loaded,
    })
}

#[derive(Debug, Clone)]
pub struct ClusterEstimate {
    pub covariance: SymmetricMatrix,
    pub dendrogram: Dendrogram,
    pub filtered: FilteredCorrelation,
}

/// Sample correlation → dendrogram → filtered correlation → rescaled by
/// the sample standard deviations.
pub fn cluster_covariance(
    panel: &ReturnPanel,
    range: Range<usize>,
    linkage: Linkage,
) -> Result<ClusterEstimate> {
    let sample = matrix::sample_covariance(panel, range)?;
    let (corr, stds) = cov_to_corr(&sample)?;
    let dendrogram = cluster(&corr, linkage)?;
    let filtered = filtered_correlation(&dendrogram)?;
    let mut covariance = corr_to_cov(&filtered.matrix, &stds)?;
    for (i, v) in sample.diagonal().into_iter().enumerate() {
        covariance.set(i, i, v);
    }
    Ok(ClusterEstimate {
        covariance,
        dendrogram,
        filtered,
    })
}
