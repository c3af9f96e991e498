use serde::{Deserialize, Serialize};

/// One global iteration (or one centralized sweep).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub log_joint: f64,
    pub num_clusters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    pub wall_time_secs: f64,
}

/// Per-iteration record of a run; serializes as a JSON array.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    /// Trailing moving average of `log_joint`; early entries average over
    /// the iterations available so far.
    pub fn log_joint_moving_average(&self, window: usize) -> Vec<f64> {
        let values: Vec<f64> = self.records.iter().map(|r| r.log_joint).collect();
        (0..values.len())
            .map(|t| {
                let start = (t + 1).saturating_sub(window.max(1));
                let slice = &values[start..=t];
                slice.iter().sum::<f64>() / slice.len() as f64
            })
            .collect()
    }

    pub fn mean_wall_time_secs(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.total_wall_time_secs() / self.records.len() as f64
    }

    pub fn total_wall_time_secs(&self) -> f64 {
        self.records.iter().map(|r| r.wall_time_secs).sum()
    }
}
