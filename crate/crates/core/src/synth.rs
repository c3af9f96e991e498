//! Synthetic Gaussian mixture data and named benchmark presets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::niw::cholesky;
use crate::sampling::{master_rng, splitmix64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub components: Vec<Component>,
    pub n: usize,
    pub seed: u64,
}

impl GmmSpec {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("mixture has no components".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("component means must be non-empty".into()));
        }
        let mut total = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "component {k}: weight must be positive"
                )));
            }
            total += c.weight;
            if c.mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.mean.len(),
                });
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("component {k}: non-finite mean")));
            }
            covariance_factor(c, d).map_err(|e| Error::InvalidParameter(format!("component {k}: {e}")))?;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

fn covariance_factor(c: &Component, d: usize) -> Result<DMatrix<f64>> {
    if c.covariance.len() != d || c.covariance.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter(format!("covariance must be {d}×{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| c.covariance[i][j]);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (0..d).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale)) {
        return Err(Error::InvalidParameter("covariance is not symmetric".into()));
    }
    cholesky(&m)
}

/// Draws `spec.n` points and their component labels.
pub fn generate_gmm(spec: &GmmSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    let d = spec.dim();
    let factors = spec
        .components
        .iter()
        .map(|c| covariance_factor(c, d))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<DVector<f64>> = spec
        .components
        .iter()
        .map(|c| DVector::from_column_slice(&c.mean))
        .collect();
    let mut cumulative: Vec<f64> = spec
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    *cumulative.last_mut().expect("non-empty") = f64::INFINITY;

    let mut rng = master_rng(spec.seed);
    let mut values = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    let mut z = DVector::zeros(d);
    for _ in 0..spec.n {
        let u: f64 = rng.random();
        let k = cumulative.partition_point(|&c| c <= u);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = &means[k] + &factors[k] * &z;
        values.extend(x.iter());
        labels.push(k);
    }
    Ok((Dataset::new(d, values)?, labels))
}

/// Stick-breaking weights from given break proportions; the unbroken
/// remainder goes to the last weight so the result sums to one.
pub fn stick_breaking_weights(breaks: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    let mut weights: Vec<f64> = breaks
        .iter()
        .map(|&v| {
            let w = v * remaining;
            remaining *= 1.0 - v;
            w
        })
        .collect();
    if let Some(last) = weights.last_mut() {
        *last += remaining;
    }
    weights
}

/// Truncated stick-breaking draw with `Beta(1, α)` proportions.
pub fn sample_stick_breaking<R: Rng + ?Sized>(alpha: f64, truncation: usize, rng: &mut R) -> Result<Vec<f64>> {
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    let beta = Beta::new(1.0, alpha).map_err(|e| Error::InvalidParameter(format!("alpha: {e}")))?;
    let breaks: Vec<f64> = (0..truncation).map(|_| beta.sample(rng)).collect();
    Ok(stick_breaking_weights(&breaks))
}

pub const PRESETS: &[&str] = &[
    "synth-2-separated",
    "synth-20k",
    "synth-40k",
    "synth-60k",
    "synth-80k",
    "synth-100k",
    "synth-1m",
];

/// Minimum distance between benchmark component means, in units of the
/// (identity) component standard deviation.
pub const MIN_MEAN_SEPARATION: f64 = 6.0;

/// Benchmark mixture: `k` equally weighted unit-covariance components in 2-D
/// with means uniform on `[-20, 20]²`, redrawn until pairwise separated by
/// at least [`MIN_MEAN_SEPARATION`].
pub fn benchmark_spec(k: usize, n: usize, seed: u64) -> GmmSpec {
    let mut rng = master_rng(splitmix64(seed));
    let mut means: Vec<[f64; 2]> = Vec::with_capacity(k);
    while means.len() < k {
        let m = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
        let separated = means
            .iter()
            .all(|o| ((o[0] - m[0]).powi(2) + (o[1] - m[1]).powi(2)).sqrt() >= MIN_MEAN_SEPARATION);
        if separated {
            means.push(m);
        }
    }
    GmmSpec {
        components: means
            .into_iter()
            .map(|m| Component {
                weight: 1.0 / k as f64,
                mean: m.to_vec(),
                covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            })
            .collect(),
        n,
        seed,
    }
}

pub fn preset(name: &str, seed: u64) -> Result<GmmSpec> {
    let n = match name {
        "synth-2-separated" => {
            let component = |m: f64| Component {
                weight: 0.5,
                mean: vec![m, m],
                covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            };
            return Ok(GmmSpec {
                components: vec![component(-10.0), component(10.0)],
                n: 200,
                seed,
            });
        }
        "synth-20k" => 20_000,
        "synth-40k" => 40_000,
        "synth-60k" => 60_000,
        "synth-80k" => 80_000,
        "synth-100k" => 100_000,
        "synth-1m" => 1_000_000,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset '{name}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(benchmark_spec(10, n, seed))
}
