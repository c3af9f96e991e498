//! Centralized collapsed Gibbs sampler and the joint log-probability used
//! for convergence traces.

use std::time::Instant;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::ari;
use crate::niw::{log_marginal, ModelHyperParams};
use crate::partition::{PartitionState, WeightObserver};
use crate::sampling::master_rng;
use crate::stats::SufficientStats;
use crate::trace::{IterationRecord, RunTrace};

/// One sweep over all points in ascending index order.
pub fn cgs_sweep<R: Rng + ?Sized>(state: &mut PartitionState, data: &Dataset, rng: &mut R) -> Result<()> {
    state.gibbs_pass(data, 0..data.len(), rng, None)
}

/// Sweep with an explicit visitation order, reporting every weight vector.
pub fn cgs_sweep_observed<R: Rng + ?Sized>(
    state: &mut PartitionState,
    data: &Dataset,
    order: &[usize],
    rng: &mut R,
    observer: WeightObserver<'_>,
) -> Result<()> {
    state.gibbs_pass(data, order.iter().copied(), rng, Some(observer))
}

/// `log p(x, z | α, G0)` from per-cluster statistics:
/// the CRP partition probability plus every cluster's marginal likelihood.
pub fn log_joint_from_stats<'a, I>(hyper: &ModelHyperParams, clusters: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a SufficientStats>,
{
    let alpha = hyper.alpha;
    let mut n = 0usize;
    let mut k = 0usize;
    let mut total = 0.0;
    for s in clusters {
        if s.is_empty() {
            return Err(Error::EmptyCluster);
        }
        n += s.n();
        k += 1;
        total += ln_gamma(s.n() as f64) + log_marginal(s, &hyper.g0)?;
    }
    // Σ_{i=1..n} log(α + i − 1) = lnΓ(α + n) − lnΓ(α)
    Ok(total + k as f64 * alpha.ln() - (ln_gamma(alpha + n as f64) - ln_gamma(alpha)))
}

pub fn log_joint(state: &PartitionState) -> Result<f64> {
    log_joint_from_stats(state.hyper(), state.cluster_stats())
}

/// Runs `iters` sweeps from the one-cluster partition.
pub fn run_cgs(
    data: &Dataset,
    hyper: ModelHyperParams,
    iters: usize,
    seed: u64,
    truth: Option<&[usize]>,
) -> Result<(PartitionState, RunTrace)> {
    if iters == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    if let Some(t) = truth {
        if t.len() != data.len() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: data.len(),
            });
        }
    }
    let mut rng = master_rng(seed);
    let mut state = PartitionState::one_cluster(data, hyper)?;
    let mut trace = RunTrace::default();
    for iteration in 1..=iters {
        let start = Instant::now();
        cgs_sweep(&mut state, data, &mut rng).map_err(|e| e.at_iteration(iteration))?;
        let wall_time_secs = start.elapsed().as_secs_f64();
        let ari = match truth {
            Some(t) if data.len() >= 2 => Some(ari(state.labels(), t)?),
            _ => None,
        };
        trace.push(IterationRecord {
            iteration,
            log_joint: log_joint(&state).map_err(|e| e.at_iteration(iteration))?,
            num_clusters: state.num_clusters(),
            ari,
            wall_time_secs,
        });
    }
    Ok((state, trace))
}
