//! Threaded master/worker driver.
//!
//! Each worker is a long-lived thread owning its shard. Per global
//! iteration the coordinator asks every worker for a sweep, collects the
//! summaries, runs the master sweep and broadcasts the label map. Workers
//! never see each other's data and the coordinator never sees raw points.

use std::ops::Range;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::master::{expand_membership, master_sweep, GlobalLabelMap, GlobalState};
use crate::metrics::ari;
use crate::niw::{default_prior, ModelHyperParams, NiwParams};
use crate::sampling::{master_rng, worker_rng};
use crate::trace::{IterationRecord, RunTrace};
use crate::worker::{WorkerState, WorkerSummary};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub alpha: f64,
    pub iterations: usize,
    pub workers: usize,
    pub seed: u64,
    /// Base measure; derived from the data when absent.
    pub prior: Option<NiwParams>,
    /// Record ARI every iteration when ground truth is given. Costs one
    /// extra evaluation-only message per worker per iteration.
    pub record_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            iterations: 100,
            workers: 1,
            seed: 0,
            prior: None,
            record_trace: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Global label per point, in dataset order.
    pub labels: Vec<usize>,
    pub trace: RunTrace,
    pub prior: NiwParams,
    /// Diagonal ridge added to the data-derived prior scale, if any.
    pub ridge: Option<f64>,
    pub num_clusters: usize,
}

/// What crosses a worker link, as seen by a [`LinkObserver`].
#[derive(Clone, Copy, Debug)]
pub enum Payload<'a> {
    /// Worker → master.
    Summary(&'a WorkerSummary),
    /// Master → worker.
    LabelMap(&'a GlobalLabelMap),
    /// Worker → coordinator local labels, sent only to compute a per-iteration
    /// ARI against ground truth.
    Diagnostic(&'a [usize]),
}

pub trait LinkObserver {
    fn observe(&mut self, worker: usize, payload: Payload<'_>);
}

struct Silent;

impl LinkObserver for Silent {
    fn observe(&mut self, _: usize, _: Payload<'_>) {}
}

enum Command {
    Sweep { iteration: usize },
    Apply(Arc<GlobalLabelMap>),
}

enum Reply {
    Summary(WorkerSummary),
    Diagnostic { worker: usize, labels: Vec<usize> },
    Failed(Error),
}

/// Contiguous shards; the first `n mod workers` shards hold one extra row.
pub fn shard(n: usize, workers: usize) -> Result<Vec<Range<usize>>> {
    if workers == 0 {
        return Err(Error::InvalidParameter("at least one worker is required".into()));
    }
    if workers > n {
        return Err(Error::InvalidParameter(format!("{workers} workers for {n} points")));
    }
    let (base, extra) = (n / workers, n % workers);
    let mut start = 0;
    Ok((0..workers)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Hyperparameters for a run, deriving the prior from `data` unless given.
pub fn resolve_hyper(data: &Dataset, alpha: f64, prior: Option<NiwParams>) -> Result<(ModelHyperParams, Option<f64>)> {
    let (g0, ridge) = match prior {
        Some(p) => {
            if p.dim() != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    found: p.dim(),
                });
            }
            (p, None)
        }
        None => {
            let d = default_prior(data)?;
            (d.niw, d.ridge)
        }
    };
    Ok((ModelHyperParams::new(alpha, g0)?, ridge))
}

pub fn run_discgs(data: &Dataset, truth: Option<&[usize]>, config: &RunConfig) -> Result<RunOutput> {
    run_discgs_observed(data, truth, config, &mut Silent)
}

pub fn run_discgs_observed(
    data: &Dataset,
    truth: Option<&[usize]>,
    config: &RunConfig,
    observer: &mut dyn LinkObserver,
) -> Result<RunOutput> {
    if config.iterations == 0 {
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
    let ranges = shard(data.len(), config.workers)?;
    let (hyper, ridge) = resolve_hyper(data, config.alpha, config.prior.clone())?;
    let tap = config.record_trace && truth.is_some() && data.len() >= 2;

    let (outcome, states) = thread::scope(|scope| -> Result<_> {
        let (reply_tx, reply_rx) = mpsc::channel();
        let mut links = Vec::with_capacity(ranges.len());
        let mut handles = Vec::with_capacity(ranges.len());
        for (j, r) in ranges.iter().enumerate() {
            let state = WorkerState::new(j, r.start, data.slice(r.clone()), hyper.clone())?;
            let (tx, rx) = mpsc::channel();
            let replies = reply_tx.clone();
            let seed = config.seed;
            handles.push(scope.spawn(move || worker_loop(state, seed, rx, replies, tap)));
            links.push(tx);
        }
        drop(reply_tx);

        let ctx = Coordinator {
            links: &links,
            replies: &reply_rx,
            ranges: &ranges,
            hyper: &hyper,
            n: data.len(),
            tap,
        };
        let outcome = ctx.run(config, truth, observer);
        drop(links);
        let states: Vec<WorkerState> = handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect();
        Ok((outcome, states))
    })?;
    let (trace, global) = outcome?;

    let mut labels = Vec::with_capacity(data.len());
    for w in &states {
        labels.extend(w.global_labels()?);
    }
    Ok(RunOutput {
        labels,
        trace,
        prior: hyper.g0,
        ridge,
        num_clusters: global.num_clusters(),
    })
}

fn worker_loop(
    mut state: WorkerState,
    seed: u64,
    commands: Receiver<Command>,
    replies: Sender<Reply>,
    tap: bool,
) -> WorkerState {
    let id = state.worker_id();
    while let Ok(cmd) = commands.recv() {
        let result = match cmd {
            Command::Sweep { iteration } => state.sweep(&mut worker_rng(seed, id, iteration)).map(|()| {
                if tap {
                    let labels = state.local().labels().to_vec();
                    let _ = replies.send(Reply::Diagnostic { worker: id, labels });
                }
                let _ = replies.send(Reply::Summary(state.summarize()));
            }),
            Command::Apply(map) => state.apply_global_labels(&map),
        };
        if let Err(e) = result {
            let _ = replies.send(Reply::Failed(e));
            break;
        }
    }
    state
}

struct Coordinator<'a> {
    links: &'a [Sender<Command>],
    replies: &'a Receiver<Reply>,
    ranges: &'a [Range<usize>],
    hyper: &'a ModelHyperParams,
    n: usize,
    tap: bool,
}

impl Coordinator<'_> {
    fn run(
        &self,
        config: &RunConfig,
        truth: Option<&[usize]>,
        observer: &mut dyn LinkObserver,
    ) -> Result<(RunTrace, GlobalState)> {
        let workers = self.links.len();
        let mut rng = master_rng(config.seed);
        let mut previous: Option<GlobalState> = None;
        let mut trace = RunTrace::default();
        for iteration in 1..=config.iterations {
            let at = |e: Error| e.at_iteration(iteration);
            let start = Instant::now();
            for tx in self.links {
                tx.send(Command::Sweep { iteration })
                    .map_err(|_| at(Error::Disconnected))?;
            }
            let mut summaries: Vec<Option<WorkerSummary>> = vec![None; workers];
            let mut diagnostics: Vec<Option<Vec<usize>>> = vec![None; workers];
            let expected = workers * if self.tap { 2 } else { 1 };
            for _ in 0..expected {
                match self.replies.recv().map_err(|_| at(Error::Disconnected))? {
                    Reply::Summary(s) => {
                        let j = s.worker_id;
                        summaries[j] = Some(s);
                    }
                    Reply::Diagnostic { worker, labels } => diagnostics[worker] = Some(labels),
                    Reply::Failed(e) => return Err(at(e)),
                }
            }
            let summaries: Vec<WorkerSummary> = summaries
                .into_iter()
                .map(|s| s.expect("one summary per worker"))
                .collect();
            for s in &summaries {
                observer.observe(s.worker_id, Payload::Summary(s));
            }

            let global = master_sweep(&summaries, previous.as_ref(), self.hyper, &mut rng).map_err(at)?;
            let map = Arc::new(global.label_map().clone());
            for (j, tx) in self.links.iter().enumerate() {
                observer.observe(j, Payload::LabelMap(&map));
                tx.send(Command::Apply(Arc::clone(&map)))
                    .map_err(|_| at(Error::Disconnected))?;
            }
            let wall_time_secs = start.elapsed().as_secs_f64();

            let ari = match truth {
                Some(t) if self.tap => {
                    for (j, labels) in diagnostics.iter().enumerate() {
                        observer.observe(j, Payload::Diagnostic(labels.as_deref().unwrap_or_default()));
                    }
                    let parts = diagnostics
                        .iter()
                        .zip(self.ranges)
                        .enumerate()
                        .map(|(j, (labels, r))| (j, r.start, labels.as_deref().unwrap_or_default()));
                    let membership = expand_membership(&map, self.n, parts).map_err(at)?;
                    Some(ari(&membership, t)?)
                }
                _ => None,
            };
            trace.push(IterationRecord {
                iteration,
                log_joint: global.log_joint().map_err(at)?,
                num_clusters: global.num_clusters(),
                ari,
                wall_time_secs,
            });
            previous = Some(global);
        }
        Ok((trace, previous.expect("at least one iteration")))
    }
}
