//! External clustering agreement: ARI, NMI and ACC.
//!
//! All three are computed from a contingency table and are invariant to
//! relabeling of either argument. NMI uses arithmetic-mean normalization
//! with natural logarithms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the NMI normalization, recorded next to reported scores.
pub const NMI_NORMALIZATION: &str = "arithmetic";

/// Cross-tabulation of two labelings over the same points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

fn dense_codes(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let (ca, ka) = dense_codes(a);
        let (cb, kb) = dense_codes(b);
        let mut counts = vec![vec![0usize; kb]; ka];
        for (&i, &j) in ca.iter().zip(&cb) {
            counts[i][j] += 1;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Self {
        let cols = counts.first().map_or(0, Vec::len);
        let row_sums: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<usize> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let n = row_sums.iter().sum();
        Self {
            counts,
            row_sums,
            col_sums,
            n,
        }
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn pairs(v: usize) -> i128 {
    let v = v as i128;
    v * (v - 1) / 2
}

/// Adjusted Rand index. Degenerate tables where the index is undefined
/// (both labelings trivial in the same way) score 1.0.
///
/// Numerator and denominator are formed in integers, so the only rounding is
/// the final division.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.n < 2 {
        return Err(Error::InvalidParameter("ARI needs at least 2 points".into()));
    }
    let index: i128 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: i128 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: i128 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    // (index − E) / (max − E) with E = sum_a·sum_b/total, scaled by 2·total
    let num = 2 * (index * total - sum_a * sum_b);
    let denom = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / denom as f64)
}

fn entropy(marginals: &[usize], n: f64) -> f64 {
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(a;b) / mean(H(a), H(b))`.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(a, b)?;
    if t.n == 0 {
        return Err(Error::InvalidParameter("NMI needs at least 1 point".into()));
    }
    let n = t.n as f64;
    let ha = entropy(&t.row_sums, n);
    let hb = entropy(&t.col_sums, n);
    let norm = 0.5 * (ha + hb);
    if norm <= 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / norm).clamp(0.0, 1.0))
}

/// Clustering accuracy under the best one-to-one matching of labels.
pub fn acc(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(predicted, truth)?;
    if t.n == 0 {
        return Err(Error::InvalidParameter("ACC needs at least 1 point".into()));
    }
    let size = t.row_sums.len().max(t.col_sums.len());
    let mut square = vec![vec![0i64; size]; size];
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            square[i][j] = c as i64;
        }
    }
    let assignment = max_weight_assignment(&square);
    let matched: i64 = assignment.iter().enumerate().map(|(i, &j)| square[i][j]).sum();
    Ok(matched as f64 / t.n as f64)
}

/// Hungarian method on a square matrix; returns the column assigned to each
/// row so that the total weight is maximal.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let max = weights.iter().flatten().copied().max().unwrap_or(0);
    // minimize cost = max − weight, 1-based potentials as in the classic formulation
    let cost = |i: usize, j: usize| max - weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Flat metrics record written as JSON. Agreement scores are present only
/// when ground truth is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    pub num_clusters_pred: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_clusters_true: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi_normalization: Option<String>,
}

fn count_distinct(labels: &[usize]) -> usize {
    dense_codes(labels).1
}

impl Metrics {
    pub fn evaluate(predicted: &[usize], truth: Option<&[usize]>) -> Result<Self> {
        let num_clusters_pred = count_distinct(predicted);
        match truth {
            None => Ok(Self {
                ari: None,
                nmi: None,
                acc: None,
                num_clusters_pred,
                num_clusters_true: None,
                nmi_normalization: None,
            }),
            Some(truth) => Ok(Self {
                ari: Some(ari(predicted, truth)?),
                nmi: Some(nmi(predicted, truth)?),
                acc: Some(acc(predicted, truth)?),
                num_clusters_pred,
                num_clusters_true: Some(count_distinct(truth)),
                nmi_normalization: Some(NMI_NORMALIZATION.to_string()),
            }),
        }
    }
}
