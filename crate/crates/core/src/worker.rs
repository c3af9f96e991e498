//! Worker side: a local collapsed Gibbs sampler over one data shard.
//!
//! A worker only ever exports a [`WorkerSummary`] (cluster sizes and
//! sufficient statistics) and only ever imports a [`GlobalLabelMap`].

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::master::GlobalLabelMap;
use crate::niw::ModelHyperParams;
use crate::partition::PartitionState;
use crate::stats::SufficientStats;

/// One local cluster as reported to the master.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub local_label: usize,
    pub size: usize,
    pub stats: SufficientStats,
    /// Global cluster the local cluster was merged into at the last
    /// broadcast; `None` for clusters opened since then.
    pub global_label: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerSummary {
    pub worker_id: usize,
    pub clusters: Vec<SummaryEntry>,
}

impl WorkerSummary {
    pub fn num_points(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }
}

#[derive(Clone, Debug)]
pub struct WorkerState {
    worker_id: usize,
    offset: usize,
    shard: Dataset,
    local: PartitionState,
}

impl WorkerState {
    /// Worker holding rows `offset..offset + shard.len()` of the full data,
    /// starting from a single local cluster.
    pub fn new(worker_id: usize, offset: usize, shard: Dataset, hyper: ModelHyperParams) -> Result<Self> {
        let local = PartitionState::one_cluster(&shard, hyper).map_err(|e| e.at_worker(worker_id))?;
        Ok(Self {
            worker_id,
            offset,
            shard,
            local,
        })
    }

    pub fn with_labels(
        worker_id: usize,
        offset: usize,
        shard: Dataset,
        labels: &[usize],
        hyper: ModelHyperParams,
    ) -> Result<Self> {
        let local = PartitionState::from_labels(&shard, labels, hyper).map_err(|e| e.at_worker(worker_id))?;
        Ok(Self {
            worker_id,
            offset,
            shard,
            local,
        })
    }

    pub fn worker_id(&self) -> usize {
        self.worker_id
    }

    pub fn shard(&self) -> &Dataset {
        &self.shard
    }

    pub fn local(&self) -> &PartitionState {
        &self.local
    }

    /// Positions of this shard's rows in the full dataset.
    pub fn global_indices(&self) -> Range<usize> {
        self.offset..self.offset + self.shard.len()
    }

    /// One local sweep in ascending shard order.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.local
            .gibbs_pass(&self.shard, 0..self.shard.len(), rng, None)
            .map_err(|e| e.at_worker(self.worker_id))
    }

    pub fn summarize(&self) -> WorkerSummary {
        let clusters = self
            .local
            .clusters()
            .iter()
            .enumerate()
            .map(|(local_label, c)| SummaryEntry {
                local_label,
                size: c.stats.n(),
                stats: c.stats.clone(),
                global_label: c.origin,
            })
            .collect();
        WorkerSummary {
            worker_id: self.worker_id,
            clusters,
        }
    }

    /// Relabels local clusters with their global ids, merging local clusters
    /// sent to the same global cluster. Local labels become the rank of the
    /// global id among those present on this worker.
    pub fn apply_global_labels(&mut self, map: &GlobalLabelMap) -> Result<()> {
        let globals = (0..self.local.num_clusters())
            .map(|local_label| {
                map.get(self.worker_id, local_label).ok_or(Error::MissingLabel {
                    worker: self.worker_id,
                    local_label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut distinct = globals.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let target: Vec<usize> = globals
            .iter()
            .map(|g| distinct.binary_search(g).expect("present"))
            .collect();
        self.local
            .coarsen(&target, distinct.into_iter().map(Some).collect())
            .map_err(|e| e.at_worker(self.worker_id))
    }

    /// Global label of every shard point, available once a map has been
    /// applied and no new local cluster has been opened since.
    pub fn global_labels(&self) -> Result<Vec<usize>> {
        let origins = self
            .local
            .clusters()
            .iter()
            .enumerate()
            .map(|(local_label, c)| {
                c.origin.ok_or(Error::MissingLabel {
                    worker: self.worker_id,
                    local_label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.local.labels().iter().map(|&l| origins[l]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::LabelEntry;
    use crate::metrics::ari;
    use crate::niw::default_prior;
    use crate::sampling::worker_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn separated_shard(n: usize, seed: u64) -> (Dataset, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let m = if c == 0 { -10.0 } else { 10.0 };
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            rows.push([m + x, m + y]);
            truth.push(c);
        }
        (Dataset::from_rows(&rows).unwrap(), truth)
    }

    fn hyper_for(data: &Dataset) -> ModelHyperParams {
        ModelHyperParams::new(1.0, default_prior(data).unwrap().niw).unwrap()
    }

    fn map_of(entries: &[(usize, usize, usize)]) -> GlobalLabelMap {
        GlobalLabelMap::new(
            entries
                .iter()
                .map(|&(worker, local_label, global_label)| LabelEntry {
                    worker,
                    local_label,
                    global_label,
                })
                .collect(),
        )
    }

    #[test]
    fn single_point_shard() {
        let (data, _) = separated_shard(10, 0);
        let shard = data.slice(3..4);
        let mut w = WorkerState::new(2, 3, shard, hyper_for(&data)).unwrap();
        for t in 0..5 {
            w.sweep(&mut worker_rng(1, 2, t)).unwrap();
            assert_eq!(w.local().num_clusters(), 1);
        }
        assert_eq!(w.global_indices(), 3..4);
    }

    #[test]
    fn recovers_local_structure() {
        let (data, truth) = separated_shard(200, 4);
        let mut w = WorkerState::new(0, 0, data.clone(), hyper_for(&data)).unwrap();
        for t in 0..20 {
            w.sweep(&mut worker_rng(9, 0, t)).unwrap();
        }
        // a transient singleton may be open at the last sweep
        assert!(ari(w.local().labels(), &truth).unwrap() > 0.97);
        assert!(w.local().num_clusters() <= 3);
    }

    #[test]
    fn identical_workers_agree() {
        let (data, _) = separated_shard(60, 5);
        let hyper = hyper_for(&data);
        let mut a = WorkerState::new(0, 0, data.clone(), hyper.clone()).unwrap();
        let mut b = WorkerState::new(0, 0, data, hyper).unwrap();
        a.sweep(&mut worker_rng(3, 0, 0)).unwrap();
        b.sweep(&mut worker_rng(3, 0, 0)).unwrap();
        assert_eq!(a.summarize(), b.summarize());
    }

    #[test]
    fn summary_entries() {
        let (data, _) = separated_shard(30, 6);
        let w = WorkerState::new(1, 0, data.clone(), hyper_for(&data)).unwrap();
        let s = w.summarize();
        assert_eq!(s.clusters.len(), 1);
        assert_eq!(s.clusters[0].size, 30);
        assert_eq!(s.clusters[0].global_label, None);

        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let w = WorkerState::with_labels(1, 0, data.clone(), &labels, hyper_for(&data)).unwrap();
        let s = w.summarize();
        for e in &s.clusters {
            let members = (0..30).filter(|i| labels[*i] == e.local_label).map(|i| data.row(i));
            assert_eq!(e.stats, SufficientStats::from_points(members).unwrap());
            assert_eq!(e.stats.n(), e.size);
        }
        let merged = SufficientStats::merge_all(s.clusters.iter().map(|e| &e.stats)).unwrap();
        let whole = SufficientStats::from_points(data.rows()).unwrap();
        assert_eq!(merged.n(), whole.n());
        assert!(merged.sum_outer().relative_eq(whole.sum_outer(), 1e-10, 1e-10));
        assert_eq!(s.num_points(), 30);
    }

    #[test]
    fn apply_identity_and_merge() {
        let (data, _) = separated_shard(12, 7);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let mut w = WorkerState::with_labels(4, 0, data.clone(), &labels, hyper_for(&data)).unwrap();
        let before = w.summarize();

        w.apply_global_labels(&map_of(&[(4, 0, 5), (4, 1, 6), (4, 2, 7)]))
            .unwrap();
        assert_eq!(w.local().labels(), labels.as_slice());
        assert_eq!(
            w.global_labels().unwrap(),
            labels.iter().map(|l| l + 5).collect::<Vec<_>>()
        );

        let mut w = WorkerState::with_labels(4, 0, data.clone(), &labels, hyper_for(&data)).unwrap();
        w.apply_global_labels(&map_of(&[(4, 0, 1), (4, 1, 0), (4, 2, 1)]))
            .unwrap();
        assert_eq!(w.local().num_clusters(), 2);
        let after = w.summarize();
        let expected = SufficientStats::merge_all([&before.clusters[0].stats, &before.clusters[2].stats]).unwrap();
        assert_eq!(after.clusters[1].stats.n(), expected.n());
        assert!(after.clusters[1]
            .stats
            .sum_outer()
            .relative_eq(expected.sum_outer(), 1e-12, 1e-12));
        assert_eq!(after.clusters[1].global_label, Some(1));
        // coarsening: points that shared a cluster still do
        let new = w.local().labels();
        for i in 0..12 {
            for j in 0..12 {
                if labels[i] == labels[j] {
                    assert_eq!(new[i], new[j]);
                }
            }
        }
    }

    #[test]
    fn apply_rejects_incomplete_map() {
        let (data, _) = separated_shard(6, 8);
        let labels = [0, 1, 0, 1, 0, 1];
        let mut w = WorkerState::with_labels(0, 0, data.clone(), &labels, hyper_for(&data)).unwrap();
        let err = w.apply_global_labels(&map_of(&[(0, 0, 0), (1, 1, 0)])).unwrap_err();
        assert!(matches!(
            err,
            Error::MissingLabel {
                worker: 0,
                local_label: 1
            }
        ));
        assert!(w.global_labels().is_err());
    }
}
