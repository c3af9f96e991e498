//! Dirichlet process Gaussian mixture clustering with a collapsed Gibbs
//! sampler, in a centralized form and a distributed master/worker form in
//! which only cluster sufficient statistics leave a worker.

pub mod central;
pub mod dataset;
pub mod error;
pub mod io;
pub mod master;
pub mod metrics;
pub mod niw;
mod partition;
pub mod runtime;
pub mod sampling;
pub mod stats;
pub mod synth;
pub mod trace;
pub mod worker;

pub use central::{cgs_sweep, log_joint, run_cgs};
pub use dataset::Dataset;
pub use error::{Error, ErrorKind, Result};
pub use master::{expand_to_global_membership, master_sweep, GlobalLabelMap, GlobalState};
pub use metrics::{acc, ari, nmi, Metrics};
pub use niw::{default_prior, ModelHyperParams, NiwParams};
pub use partition::{PartitionState, WeightObserver};
pub use runtime::{run_discgs, RunConfig, RunOutput};
pub use stats::SufficientStats;
pub use trace::{IterationRecord, RunTrace};
pub use worker::{SummaryEntry, WorkerState, WorkerSummary};
