//! Master side: reassigns whole local clusters ("batches") to global
//! clusters using only their sufficient statistics.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::central::log_joint_from_stats;
use crate::error::{Error, Result};
use crate::niw::{log_posterior_predictive, log_prior_predictive, ModelHyperParams};
use crate::partition::WeightObserver;
use crate::sampling::sample_log_categorical;
use crate::stats::SufficientStats;
use crate::worker::{SummaryEntry, WorkerState, WorkerSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelEntry {
    pub worker: usize,
    pub local_label: usize,
    pub global_label: usize,
}

/// `(worker, local label) → global label`, broadcast to workers after each
/// master sweep. Global labels are dense.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalLabelMap {
    entries: Vec<LabelEntry>,
}

impl GlobalLabelMap {
    pub fn new(mut entries: Vec<LabelEntry>) -> Self {
        entries.sort_unstable();
        Self { entries }
    }

    pub fn get(&self, worker: usize, local_label: usize) -> Option<usize> {
        self.entries
            .binary_search_by(|e| (e.worker, e.local_label).cmp(&(worker, local_label)))
            .ok()
            .map(|i| self.entries[i].global_label)
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn num_global_clusters(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.global_label)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Global clusters after a master sweep.
#[derive(Clone, Debug)]
pub struct GlobalState {
    map: GlobalLabelMap,
    clusters: Vec<SufficientStats>,
    hyper: ModelHyperParams,
}

impl GlobalState {
    /// Global state in which every batch sits in the global cluster it
    /// reports; those labels must cover `0..K` without gaps.
    pub fn from_summaries(summaries: &[WorkerSummary], hyper: &ModelHyperParams) -> Result<Self> {
        let dim = hyper.g0.dim();
        let mut clusters: Vec<SufficientStats> = Vec::new();
        let mut entries = Vec::new();
        for s in summaries {
            for e in &s.clusters {
                let g = e.global_label.ok_or(Error::MissingLabel {
                    worker: s.worker_id,
                    local_label: e.local_label,
                })?;
                if clusters.len() <= g {
                    clusters.resize(g + 1, SufficientStats::zero(dim));
                }
                clusters[g].merge(&e.stats).map_err(|source| Error::AtBatch {
                    worker: s.worker_id,
                    local_label: e.local_label,
                    source: Box::new(source),
                })?;
                entries.push(LabelEntry {
                    worker: s.worker_id,
                    local_label: e.local_label,
                    global_label: g,
                });
            }
        }
        if let Some(g) = clusters.iter().position(SufficientStats::is_empty) {
            return Err(Error::InvalidParameter(format!("global label {g} has no batch")));
        }
        if clusters.is_empty() {
            return Err(Error::EmptyCluster);
        }
        Ok(Self {
            map: GlobalLabelMap::new(entries),
            clusters,
            hyper: hyper.clone(),
        })
    }

    pub fn label_map(&self) -> &GlobalLabelMap {
        &self.map
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_stats(&self) -> &[SufficientStats] {
        &self.clusters
    }

    pub fn hyper(&self) -> &ModelHyperParams {
        &self.hyper
    }

    pub fn log_joint(&self) -> Result<f64> {
        log_joint_from_stats(&self.hyper, &self.clusters)
    }
}

struct Batch<'a> {
    worker: usize,
    entry: &'a SummaryEntry,
}

fn collect_batches<'a>(
    summaries: &'a [WorkerSummary],
    previous: Option<&GlobalState>,
    hyper: &ModelHyperParams,
) -> Result<Vec<Batch<'a>>> {
    let dim = hyper.g0.dim();
    let known = previous.map_or(0, GlobalState::num_clusters);
    let mut workers = BTreeSet::new();
    let mut batches = Vec::new();
    for s in summaries {
        if !workers.insert(s.worker_id) {
            return Err(Error::InvalidParameter(format!(
                "duplicate summary from worker {}",
                s.worker_id
            )));
        }
        for entry in &s.clusters {
            let at = |source: Error| Error::AtBatch {
                worker: s.worker_id,
                local_label: entry.local_label,
                source: Box::new(source),
            };
            if entry.stats.dim() != dim {
                return Err(at(Error::DimensionMismatch {
                    expected: dim,
                    found: entry.stats.dim(),
                }));
            }
            if entry.size == 0 || entry.stats.n() != entry.size {
                return Err(at(Error::InvalidParameter(format!(
                    "size {} disagrees with statistics count {}",
                    entry.size,
                    entry.stats.n()
                ))));
            }
            if let Some(g) = entry.global_label {
                if g >= known {
                    return Err(at(Error::InvalidParameter(format!(
                        "inherited global label {g} unknown to the master ({known} clusters)"
                    ))));
                }
            }
            batches.push(Batch {
                worker: s.worker_id,
                entry,
            });
        }
    }
    if batches.is_empty() {
        return Err(Error::EmptyCluster);
    }
    Ok(batches)
}

/// One master sweep over every local cluster of every worker, in an order
/// shuffled with `rng`.
///
/// Batches that carry an inherited global label start in that global
/// cluster; the others are unassigned until visited.
pub fn master_sweep<R: Rng + ?Sized>(
    summaries: &[WorkerSummary],
    previous: Option<&GlobalState>,
    hyper: &ModelHyperParams,
    rng: &mut R,
) -> Result<GlobalState> {
    let batches = collect_batches(summaries, previous, hyper)?;
    let mut order: Vec<usize> = (0..batches.len()).collect();
    order.shuffle(rng);
    batch_pass(&batches, hyper, &order, rng, None)
}

/// Master sweep with an explicit batch order (indices into the batches
/// listed worker by worker, entry by entry), reporting each weight vector.
pub fn master_sweep_observed<R: Rng + ?Sized>(
    summaries: &[WorkerSummary],
    previous: Option<&GlobalState>,
    hyper: &ModelHyperParams,
    order: &[usize],
    rng: &mut R,
    observer: WeightObserver<'_>,
) -> Result<GlobalState> {
    let batches = collect_batches(summaries, previous, hyper)?;
    let mut seen = vec![false; batches.len()];
    for &b in order {
        if b >= batches.len() || std::mem::replace(&mut seen[b], true) {
            return Err(Error::InvalidParameter("batch order must be a permutation".into()));
        }
    }
    if order.len() != batches.len() {
        return Err(Error::InvalidParameter("batch order must be a permutation".into()));
    }
    batch_pass(&batches, hyper, order, rng, Some(observer))
}

fn batch_pass<R: Rng + ?Sized>(
    batches: &[Batch<'_>],
    hyper: &ModelHyperParams,
    order: &[usize],
    rng: &mut R,
    mut observer: Option<WeightObserver<'_>>,
) -> Result<GlobalState> {
    let dim = hyper.g0.dim();
    let ln_alpha = hyper.alpha.ln();
    let mut assigned: Vec<Option<usize>> = batches.iter().map(|b| b.entry.global_label).collect();
    let slot_count = assigned.iter().flatten().map(|g| g + 1).max().unwrap_or(0);
    let mut slots: Vec<Option<SufficientStats>> = vec![None; slot_count];
    for (b, g) in batches.iter().zip(&assigned) {
        if let Some(g) = *g {
            slots[g]
                .get_or_insert_with(|| SufficientStats::zero(dim))
                .merge(&b.entry.stats)?;
        }
    }

    let mut weights = Vec::new();
    let mut slot_of = Vec::new();
    for &b in order {
        let batch = &batches[b];
        let stats = &batch.entry.stats;
        let at = |source: Error| Error::AtBatch {
            worker: batch.worker,
            local_label: batch.entry.local_label,
            source: Box::new(source),
        };
        if let Some(k) = assigned[b] {
            let cluster = slots[k].as_mut().expect("assigned slot is live");
            cluster.subtract(stats).map_err(at)?;
            if cluster.is_empty() {
                slots[k] = None;
            }
        }

        weights.clear();
        slot_of.clear();
        for (s, c) in slots.iter().enumerate() {
            if let Some(c) = c {
                let w = (c.n() as f64).ln() + log_posterior_predictive(stats, c, &hyper.g0).map_err(at)?;
                weights.push(w);
                slot_of.push(s);
            }
        }
        weights.push(ln_alpha + log_prior_predictive(stats, &hyper.g0).map_err(at)?);
        if let Some(obs) = observer.as_mut() {
            obs(b, &weights);
        }

        let pick = sample_log_categorical(&weights, rng.random::<f64>());
        let target = match slot_of.get(pick) {
            Some(&s) => s,
            None => {
                let s = slots.iter().position(Option::is_none).unwrap_or(slots.len());
                if s == slots.len() {
                    slots.push(None);
                }
                s
            }
        };
        slots[target]
            .get_or_insert_with(|| SufficientStats::zero(dim))
            .merge(stats)
            .map_err(at)?;
        assigned[b] = Some(target);
    }

    let mut remap = vec![usize::MAX; slots.len()];
    let mut clusters = Vec::new();
    for (s, c) in slots.into_iter().enumerate() {
        if let Some(c) = c {
            remap[s] = clusters.len();
            clusters.push(c);
        }
    }
    let entries = batches
        .iter()
        .zip(&assigned)
        .map(|(b, g)| LabelEntry {
            worker: b.worker,
            local_label: b.entry.local_label,
            global_label: remap[g.expect("every batch visited")],
        })
        .collect();
    Ok(GlobalState {
        map: GlobalLabelMap::new(entries),
        clusters,
        hyper: hyper.clone(),
    })
}

/// Per-point global labels in original dataset order. Each part is
/// `(worker id, offset of its shard, local labels of its points)`.
pub fn expand_membership<'a, I>(map: &GlobalLabelMap, n: usize, parts: I) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = (usize, usize, &'a [usize])>,
{
    let mut out = vec![usize::MAX; n];
    for (worker, offset, labels) in parts {
        for (i, &local_label) in labels.iter().enumerate() {
            let slot = out.get_mut(offset + i).ok_or_else(|| {
                Error::InvalidParameter(format!("worker {worker} covers index {} beyond {n}", offset + i))
            })?;
            if *slot != usize::MAX {
                return Err(Error::InvalidParameter(format!("index {} covered twice", offset + i)));
            }
            *slot = map
                .get(worker, local_label)
                .ok_or(Error::MissingLabel { worker, local_label })?;
        }
    }
    if let Some(i) = out.iter().position(|&l| l == usize::MAX) {
        return Err(Error::InvalidParameter(format!("index {i} not covered by any worker")));
    }
    Ok(out)
}

pub fn expand_to_global_membership(map: &GlobalLabelMap, workers: &[WorkerState]) -> Result<Vec<usize>> {
    let n = workers.iter().map(|w| w.shard().len()).sum();
    expand_membership(
        map,
        n,
        workers
            .iter()
            .map(|w| (w.worker_id(), w.global_indices().start, w.local().labels())),
    )
}
