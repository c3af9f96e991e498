//! Normal-Inverse-Wishart conjugate algebra.
//!
//! Every density here is a log density. Predictives of a batch of points are
//! evaluated from sufficient statistics alone, so callers never need the raw
//! observations of a cluster.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::stats::{add_outer, SufficientStats};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// NIW hyper-parameters `(μ, κ, ν, Ψ)`, used both as the base measure and as
/// per-cluster posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiwParams {
    pub mu: DVector<f64>,
    pub kappa: f64,
    pub nu: f64,
    pub psi: DMatrix<f64>,
}

impl NiwParams {
    /// Validated constructor.
    pub fn new(mu: DVector<f64>, kappa: f64, nu: f64, psi: DMatrix<f64>) -> Result<Self> {
        let params = Self { mu, kappa, nu, psi };
        params.validate()?;
        Ok(params)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidParameter("NIW dimension must be at least 1".into()));
        }
        if self.psi.nrows() != d || self.psi.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.psi.nrows(),
            });
        }
        if !self.mu.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("NIW mean must be finite".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.nu > d as f64 - 1.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nu must exceed d - 1 = {}, got {}",
                d - 1,
                self.nu
            )));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (self.psi[(i, j)], self.psi[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter("psi must be symmetric".into()));
                }
            }
        }
        log_det(&self.psi).map(|_| ())
    }

    /// Conjugate update with the points summarized by `s`.
    pub fn posterior(&self, s: &SufficientStats) -> NiwParams {
        debug_assert_eq!(s.dim(), self.dim());
        let Some(mean) = s.mean() else {
            return self.clone();
        };
        let n = s.n() as f64;
        let kappa = self.kappa + n;
        let nu = self.nu + n;
        let mu = (&self.mu * self.kappa + &mean * n) / kappa;
        let mut psi = &self.psi + s.scatter();
        let diff = &self.mu - &mean;
        add_outer(&mut psi, diff.as_slice(), self.kappa * n / kappa);
        NiwParams { mu, kappa, nu, psi }
    }
}

/// DP concentration together with the NIW base measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHyperParams {
    pub alpha: f64,
    pub g0: NiwParams,
}

impl ModelHyperParams {
    pub fn new(alpha: f64, g0: NiwParams) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        g0.validate()?;
        Ok(Self { alpha, g0 })
    }
}

/// `log |m|` through a Cholesky factorization.
pub fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    Ok(cholesky(m)?.diagonal().iter().map(|l| 2.0 * l.ln()).sum())
}

/// Lower Cholesky factor, or a degeneracy error carrying the smallest
/// eigenvalue of `m`.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match m.clone().cholesky() {
        Some(c) if c.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0) => Ok(c.unpack()),
        _ => {
            let min_eigenvalue = m
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            Err(Error::Degenerate { min_eigenvalue })
        }
    }
}

/// `log Γ_d(a) = d(d−1)/4 · log π + Σ_{j=1..d} log Γ(a + (1−j)/2)`.
pub fn log_multigamma(d: usize, a: f64) -> Result<f64> {
    if d == 0 || a.partial_cmp(&((d as f64 - 1.0) / 2.0)) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter(format!(
            "multivariate gamma needs a > (d-1)/2, got d={d}, a={a}"
        )));
    }
    let df = d as f64;
    Ok(df * (df - 1.0) / 4.0 * LN_PI + (1..=d).map(|j| ln_gamma(a + (1.0 - j as f64) / 2.0)).sum::<f64>())
}

/// Log marginal likelihood of the points summarized by `s` under `prior`.
/// Empty statistics give 0.
pub fn log_marginal(s: &SufficientStats, prior: &NiwParams) -> Result<f64> {
    if s.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: s.dim(),
        });
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    let d = prior.dim() as f64;
    let n = s.n() as f64;
    let post = prior.posterior(s);
    let prior_log_det = log_det(&prior.psi)?;
    let post_log_det = log_det(&post.psi)?;
    Ok(-n * d / 2.0 * LN_PI
        + d / 2.0 * (prior.kappa.ln() - post.kappa.ln())
        + log_multigamma(prior.dim(), post.nu / 2.0)?
        - log_multigamma(prior.dim(), prior.nu / 2.0)?
        + prior.nu / 2.0 * prior_log_det
        - post.nu / 2.0 * post_log_det)
}

/// Joint predictive of `batch` given the points in `cluster`, using the
/// cluster posterior as the effective prior.
pub fn log_posterior_predictive(batch: &SufficientStats, cluster: &SufficientStats, prior: &NiwParams) -> Result<f64> {
    if cluster.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: cluster.dim(),
        });
    }
    log_marginal(batch, &prior.posterior(cluster))
}

/// Joint predictive of `batch` for a brand new cluster.
pub fn log_prior_predictive(batch: &SufficientStats, prior: &NiwParams) -> Result<f64> {
    log_marginal(batch, prior)
}

/// Single-point predictive under fixed NIW parameters, with the Cholesky
/// factor and all gamma terms precomputed.
///
/// Uses `|Ψ + c·vvᵀ| = |Ψ|·(1 + c·vᵀΨ⁻¹v)`, so each evaluation costs one
/// triangular solve.
#[derive(Clone, Debug)]
pub struct PointPredictive {
    mu: Vec<f64>,
    /// Lower Cholesky factor of Ψ, row-major.
    chol: Vec<f64>,
    shrink: f64,
    exponent: f64,
    constant: f64,
}

impl PointPredictive {
    pub fn new(params: &NiwParams) -> Result<Self> {
        let d = params.dim();
        let df = d as f64;
        let l = cholesky(&params.psi)?;
        let log_det: f64 = l.diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let (kappa, nu) = (params.kappa, params.nu);
        let constant = -df / 2.0 * LN_PI + df / 2.0 * (kappa.ln() - (kappa + 1.0).ln()) + ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma((nu + 1.0 - df) / 2.0)
            - 0.5 * log_det;
        let mut chol = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                chol[i * d + j] = l[(i, j)];
            }
        }
        Ok(Self {
            mu: params.mu.as_slice().to_vec(),
            chol,
            shrink: kappa / (kappa + 1.0),
            exponent: (nu + 1.0) / 2.0,
            constant,
        })
    }

    /// Convenience for the posterior of `prior` after observing `s`.
    pub fn for_cluster(prior: &NiwParams, s: &SufficientStats) -> Result<Self> {
        Self::new(&prior.posterior(s))
    }

    #[inline]
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mu.len();
        let mut buf = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if d <= buf.len() {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let mut acc = x[i] - self.mu[i];
            for (l, yj) in row.iter().zip(y.iter()) {
                acc -= l * yj;
            }
            let yi = acc / self.chol[i * d + i];
            y[i] = yi;
            q += yi * yi;
        }
        self.constant - self.exponent * (self.shrink * q).ln_1p()
    }
}

/// Data-driven base measure: empirical mean and covariance, `κ = 1`,
/// `ν = d + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefaultPrior {
    pub niw: NiwParams,
    /// Diagonal ridge added to a near-singular covariance, if any.
    pub ridge: Option<f64>,
}

pub fn default_prior(data: &Dataset) -> Result<DefaultPrior> {
    let n = data.len();
    let d = data.dim();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "default prior needs at least 2 observations, got {n}"
        )));
    }
    let mut mean = DVector::zeros(d);
    for x in data.rows() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for x in data.rows() {
        for (c, (v, m)) in centered.iter_mut().zip(x.iter().zip(mean.iter())) {
            *c = v - m;
        }
        add_outer(&mut cov, &centered, 1.0);
    }
    cov /= (n - 1) as f64;

    let trace = cov.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Degenerate { min_eigenvalue: 0.0 });
    }
    let min_eig = cov
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let per_dim = trace / d as f64;
    let ridge = if min_eig < 1e-9 * per_dim {
        let r = 1e-6 * per_dim;
        for i in 0..d {
            cov[(i, i)] += r;
        }
        Some(r)
    } else {
        None
    };
    let niw = NiwParams::new(mean, 1.0, d as f64 + 1.0, cov)?;
    Ok(DefaultPrior { niw, ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn unit_prior_1d() -> NiwParams {
        NiwParams::new(DVector::from_element(1, 0.0), 1.0, 2.0, DMatrix::identity(1, 1)).unwrap()
    }

    fn stats(points: &[Vec<f64>]) -> SufficientStats {
        SufficientStats::from_points(points.iter().map(Vec::as_slice)).unwrap()
    }

    fn random_prior(rng: &mut ChaCha8Rng, d: usize) -> NiwParams {
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let psi = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
        let psi = (&psi + psi.transpose()) * 0.5;
        let mu = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        NiwParams::new(
            mu,
            rng.random_range(0.1..3.0),
            d as f64 - 1.0 + rng.random_range(0.5..5.0),
            psi,
        )
        .unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal) + 1.0)
                    .collect()
            })
            .collect()
    }

    /// Student-t log density with `df` degrees of freedom, location `loc`, scale `scale`.
    fn student_t_ln(x: f64, df: f64, loc: f64, scale: f64) -> f64 {
        use statrs::distribution::{Continuous, StudentsT};
        StudentsT::new(loc, scale, df).unwrap().ln_pdf(x)
    }

    #[test]
    fn validation() {
        let ok = unit_prior_1d();
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.kappa = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.nu = -0.5;
        assert!(bad.validate().is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(NiwParams::new(DVector::zeros(2), 1.0, 3.0, asym).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match NiwParams::new(DVector::zeros(2), 1.0, 3.0, not_pd) {
            Err(Error::Degenerate { min_eigenvalue }) => assert_relative_eq!(min_eigenvalue, -1.0, epsilon = 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(ModelHyperParams::new(0.0, ok).is_err());
    }

    #[test]
    fn posterior_of_nothing_is_prior() {
        let prior = unit_prior_1d();
        assert_eq!(prior.posterior(&SufficientStats::zero(1)), prior);
    }

    #[test]
    fn posterior_of_point_at_prior_mean() {
        let psi = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let prior = NiwParams::new(DVector::from_vec(vec![1.0, -1.0]), 1.0, 3.0, psi.clone()).unwrap();
        let post = prior.posterior(&stats(&[vec![1.0, -1.0]]));
        assert_eq!(post.mu, prior.mu);
        assert_eq!(post.kappa, 2.0);
        assert_eq!(post.nu, 4.0);
        assert_eq!(post.psi, psi);
    }

    /// One observation at a time, using only the single-point update rules.
    fn sequential_posterior(prior: &NiwParams, points: &[Vec<f64>]) -> NiwParams {
        let mut p = prior.clone();
        for x in points {
            let x = DVector::from_column_slice(x);
            let kappa = p.kappa + 1.0;
            let diff = &x - &p.mu;
            let psi = &p.psi + &diff * diff.transpose() * (p.kappa / kappa);
            let mu = (&p.mu * p.kappa + &x) / kappa;
            p = NiwParams {
                mu,
                kappa,
                nu: p.nu + 1.0,
                psi,
            };
        }
        p
    }

    #[test]
    fn posterior_matches_sequential_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let prior = random_prior(&mut rng, 2);
            let points = random_points(&mut rng, 2, 10);
            let batch = prior.posterior(&stats(&points));
            let seq = sequential_posterior(&prior, &points);
            assert_relative_eq!(batch.kappa, seq.kappa, max_relative = 1e-10);
            assert_relative_eq!(batch.nu, seq.nu, max_relative = 1e-10);
            assert_relative_eq!(batch.mu, seq.mu, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(batch.psi, seq.psi, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn multigamma_values() {
        assert_relative_eq!(log_multigamma(1, 1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(log_multigamma(1, 0.5).unwrap(), 0.5 * PI.ln(), epsilon = 1e-12);
        // term-by-term: 3/2·ln π + lnΓ(4) + lnΓ(3.5) + lnΓ(3)
        let expected = 1.5 * PI.ln() + 6f64.ln() + (15.0 / 8.0 * PI.sqrt()).ln() + 2f64.ln();
        assert_relative_eq!(log_multigamma(3, 4.0).unwrap(), expected, max_relative = 1e-12);
        assert!(log_multigamma(3, 1.0).is_err());
        assert!(log_multigamma(0, 1.0).is_err());
    }

    #[test]
    fn marginal_of_single_point_is_student_t() {
        let prior = unit_prior_1d();
        let lm = log_marginal(&stats(&[vec![0.0]]), &prior).unwrap();
        assert_relative_eq!(lm, (1.0 / (2.0 * 2f64.sqrt())).ln(), max_relative = 1e-12);
        assert_relative_eq!(lm, -1.0397207708399179, max_relative = 1e-12);
        assert_relative_eq!(lm, student_t_ln(0.0, 2.0, 0.0, 1.0), max_relative = 1e-10);
        assert_eq!(log_prior_predictive(&stats(&[vec![0.0]]), &prior).unwrap(), lm);
        assert_eq!(log_marginal(&SufficientStats::zero(1), &prior).unwrap(), 0.0);
    }

    #[test]
    fn point_posterior_predictive_is_student_t() {
        // cluster {0}: κ=2, ν=3, μ=0, Ψ=1 → t with df=ν=3, scale² = Ψ(κ+1)/(κ·df) = 1/2
        let prior = unit_prior_1d();
        for x in [0.0, 0.7, -2.5] {
            let got = log_posterior_predictive(&stats(&[vec![x]]), &stats(&[vec![0.0]]), &prior).unwrap();
            assert_relative_eq!(got, student_t_ln(x, 3.0, 0.0, 0.5f64.sqrt()), max_relative = 1e-10);
        }
        let empty = SufficientStats::zero(1);
        assert_eq!(
            log_posterior_predictive(&empty, &stats(&[vec![0.0]]), &prior).unwrap(),
            0.0
        );
    }

    #[test]
    fn cached_point_predictive_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=5 {
            let prior = random_prior(&mut rng, d);
            let cluster = stats(&random_points(&mut rng, d, 7));
            let cache = PointPredictive::for_cluster(&prior, &cluster).unwrap();
            let prior_cache = PointPredictive::new(&prior).unwrap();
            for x in random_points(&mut rng, d, 5) {
                let single = stats(std::slice::from_ref(&x));
                let direct = log_posterior_predictive(&single, &cluster, &prior).unwrap();
                assert_relative_eq!(cache.log_density(&x), direct, max_relative = 1e-10);
                let fresh = log_prior_predictive(&single, &prior).unwrap();
                assert_relative_eq!(prior_cache.log_density(&x), fresh, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn marginal_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let prior = random_prior(&mut rng, 2);
        let points = random_points(&mut rng, 2, 12);
        let mut acc = SufficientStats::zero(2);
        let mut chained = 0.0;
        for x in &points {
            let single = stats(std::slice::from_ref(x));
            chained += if acc.is_empty() {
                log_prior_predictive(&single, &prior).unwrap()
            } else {
                log_posterior_predictive(&single, &acc, &prior).unwrap()
            };
            acc.add_point(x).unwrap();
        }
        assert_relative_eq!(log_marginal(&acc, &prior).unwrap(), chained, max_relative = 1e-8);
    }

    #[test]
    fn default_prior_settings() {
        let data = Dataset::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        // rank-one covariance triggers the ridge
        let p = default_prior(&data).unwrap();
        assert_eq!(p.niw.mu.as_slice(), &[1.0, 1.0]);
        assert_eq!(p.niw.kappa, 1.0);
        assert_eq!(p.niw.nu, 3.0);
        assert_eq!(p.ridge, Some(2e-6));

        let data = Dataset::from_rows(&[[0.0, 1.0], [2.0, 2.0], [1.0, 5.0]]).unwrap();
        let shifted = Dataset::from_rows(&[[10.0, -2.0], [12.0, -1.0], [11.0, 2.0]]).unwrap();
        let (a, b) = (default_prior(&data).unwrap(), default_prior(&shifted).unwrap());
        assert_eq!(a.ridge, None);
        assert_relative_eq!(
            &b.niw.mu - &a.niw.mu,
            DVector::from_vec(vec![10.0, -3.0]),
            epsilon = 1e-12
        );
        assert_relative_eq!(a.niw.psi, b.niw.psi, epsilon = 1e-12);

        assert!(default_prior(&Dataset::from_rows(&[[1.0, 1.0]]).unwrap()).is_err());
        let flat = Dataset::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(default_prior(&flat), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn default_prior_of_standard_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 2]> = (0..1000)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let p = default_prior(&Dataset::from_rows(&rows).unwrap()).unwrap();
        assert_relative_eq!(p.niw.psi, DMatrix::identity(2, 2), epsilon = 0.15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn posterior_is_order_invariant_and_pd(seed in any::<u64>(), d in 1usize..5, n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prior = random_prior(&mut rng, d);
            let mut points = random_points(&mut rng, d, n);
            let a = prior.posterior(&stats(&points));
            points.reverse();
            let b = prior.posterior(&stats(&points));
            prop_assert!((a.kappa - b.kappa).abs() <= 1e-12);
            prop_assert!(a.mu.relative_eq(&b.mu, 1e-12, 1e-12));
            prop_assert!(a.psi.relative_eq(&b.psi, 1e-12, 1e-11));
            prop_assert!(cholesky(&a.psi).is_ok());
        }
    }
}
