//! Membership vector plus per-cluster sufficient statistics, and the
//! point-wise collapsed Gibbs update shared by the centralized sampler and
//! the workers.

use std::collections::BTreeMap;

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::niw::{ModelHyperParams, PointPredictive};
use crate::sampling::sample_log_categorical;
use crate::stats::SufficientStats;

#[derive(Clone, Debug)]
pub(crate) struct Cluster {
    pub(crate) stats: SufficientStats,
    predictive: PointPredictive,
    /// Global label this cluster inherited from the last broadcast, if any.
    pub(crate) origin: Option<usize>,
}

impl Cluster {
    fn new(stats: SufficientStats, hyper: &ModelHyperParams, origin: Option<usize>) -> Result<Self> {
        let predictive = PointPredictive::for_cluster(&hyper.g0, &stats)?;
        Ok(Self {
            stats,
            predictive,
            origin,
        })
    }

    fn refresh(&mut self, hyper: &ModelHyperParams) -> Result<()> {
        self.predictive = PointPredictive::for_cluster(&hyper.g0, &self.stats)?;
        Ok(())
    }
}

/// Dense labels `0..K` over `n` points with one non-empty cluster per label.
#[derive(Clone, Debug)]
pub struct PartitionState {
    labels: Vec<usize>,
    clusters: Vec<Cluster>,
    hyper: ModelHyperParams,
    fresh: PointPredictive,
}

/// Receives the index being resampled and its `K + 1` log-weights, the last
/// entry being the new-cluster option.
pub type WeightObserver<'a> = &'a mut dyn FnMut(usize, &[f64]);

impl PartitionState {
    /// All points in a single cluster.
    pub fn one_cluster(data: &Dataset, hyper: ModelHyperParams) -> Result<Self> {
        Self::from_labels(data, &vec![0; data.len()], hyper)
    }

    /// Builds the state for an arbitrary labeling; labels are compacted in
    /// increasing order of their values.
    pub fn from_labels(data: &Dataset, labels: &[usize], hyper: ModelHyperParams) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: data.len(),
            });
        }
        if data.is_empty() {
            return Err(Error::EmptyCluster);
        }
        if data.dim() != hyper.g0.dim() {
            return Err(Error::DimensionMismatch {
                expected: hyper.g0.dim(),
                found: data.dim(),
            });
        }
        let mut codes = BTreeMap::new();
        for &l in labels {
            codes.entry(l).or_insert(0usize);
        }
        for (k, v) in codes.values_mut().enumerate() {
            *v = k;
        }
        let dense: Vec<usize> = labels.iter().map(|l| codes[l]).collect();
        let mut stats = vec![SufficientStats::zero(data.dim()); codes.len()];
        for (x, &k) in data.rows().zip(&dense) {
            stats[k].add_point(x)?;
        }
        let clusters = stats
            .into_iter()
            .map(|s| Cluster::new(s, &hyper, None))
            .collect::<Result<Vec<_>>>()?;
        let fresh = PointPredictive::new(&hyper.g0)?;
        Ok(Self {
            labels: dense,
            clusters,
            hyper,
            fresh,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn hyper(&self) -> &ModelHyperParams {
        &self.hyper
    }

    pub fn cluster_stats(&self) -> impl ExactSizeIterator<Item = &SufficientStats> + '_ {
        self.clusters.iter().map(|c| &c.stats)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.stats.n()).collect()
    }

    pub(crate) fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// One collapsed Gibbs pass over `order`. Empty clusters are dropped as
    /// soon as they appear and labels are compacted once the pass ends.
    pub(crate) fn gibbs_pass<R, I>(
        &mut self,
        data: &Dataset,
        order: I,
        rng: &mut R,
        mut observer: Option<WeightObserver<'_>>,
    ) -> Result<()>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = usize>,
    {
        if data.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: self.labels.len(),
            });
        }
        let ln_alpha = self.hyper.alpha.ln();
        let mut slots: Vec<Option<Cluster>> = std::mem::take(&mut self.clusters).into_iter().map(Some).collect();
        let mut weights = Vec::with_capacity(slots.len() + 1);
        let mut slot_of = Vec::with_capacity(slots.len());

        let result = (|| -> Result<()> {
            for i in order {
                let x = data.row(i);
                let k = self.labels[i];
                let cluster = slots[k].as_mut().expect("label points at a live cluster");
                cluster.stats.remove_point(x).map_err(|e| e.at_point(i))?;
                if cluster.stats.is_empty() {
                    slots[k] = None;
                } else {
                    cluster.refresh(&self.hyper).map_err(|e| e.at_point(i))?;
                }

                weights.clear();
                slot_of.clear();
                for (s, c) in slots.iter().enumerate() {
                    if let Some(c) = c {
                        weights.push((c.stats.n() as f64).ln() + c.predictive.log_density(x));
                        slot_of.push(s);
                    }
                }
                weights.push(ln_alpha + self.fresh.log_density(x));
                if let Some(obs) = observer.as_mut() {
                    obs(i, &weights);
                }

                let pick = sample_log_categorical(&weights, rng.random::<f64>());
                let target = match slot_of.get(pick) {
                    Some(&s) => s,
                    None => {
                        let s = slots.iter().position(Option::is_none).unwrap_or(slots.len());
                        let empty = Cluster {
                            stats: SufficientStats::zero(data.dim()),
                            predictive: self.fresh.clone(),
                            origin: None,
                        };
                        if s == slots.len() {
                            slots.push(Some(empty));
                        } else {
                            slots[s] = Some(empty);
                        }
                        s
                    }
                };
                let cluster = slots[target].as_mut().expect("target slot is live");
                cluster.stats.add_point(x).map_err(|e| e.at_point(i))?;
                cluster.refresh(&self.hyper).map_err(|e| e.at_point(i))?;
                self.labels[i] = target;
            }
            Ok(())
        })();

        let mut remap = vec![usize::MAX; slots.len()];
        for (s, c) in slots.into_iter().enumerate() {
            if let Some(c) = c {
                remap[s] = self.clusters.len();
                self.clusters.push(c);
            }
        }
        for l in &mut self.labels {
            *l = remap[*l];
        }
        result
    }

    /// Merges clusters according to `target` (old label → new label, new
    /// labels dense) and sets the new clusters' origins.
    pub(crate) fn coarsen(&mut self, target: &[usize], origins: Vec<Option<usize>>) -> Result<()> {
        debug_assert_eq!(target.len(), self.clusters.len());
        let dim = self.hyper.g0.dim();
        let mut merged = vec![SufficientStats::zero(dim); origins.len()];
        for (c, &t) in self.clusters.iter().zip(target) {
            merged[t].merge(&c.stats)?;
        }
        self.clusters = merged
            .into_iter()
            .zip(origins)
            .map(|(s, o)| Cluster::new(s, &self.hyper, o))
            .collect::<Result<Vec<_>>>()?;
        for l in &mut self.labels {
            *l = target[*l];
        }
        Ok(())
    }
}
