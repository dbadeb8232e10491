//! Per-run time series of norms, radius estimates and invariants.

use crate::error::{Error, Result};
use crate::gevrey::RadiusEstimate;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Gevrey norms of one state at one strip half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreySample<T> {
    pub sigma: T,
    pub norm_u: T,
    pub norm_v: T,
    pub pair: T,
}

/// One observed time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow<T> {
    pub time: T,
    pub step: u64,
    pub l2_u: T,
    pub l2_v: T,
    pub pair_l2: T,
    /// `\int u^2 dx` and `\int v^2 dx`; any weighted invariant
    /// `Q = q_u + eta q_v` can be reconstructed after the fact.
    pub q_u: T,
    pub q_v: T,
    pub max_abs: T,
    pub gevrey: Vec<GevreySample<T>>,
    pub radius_u: Option<RadiusEstimate<T>>,
    pub radius_v: Option<RadiusEstimate<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RunStatus {
    Completed,
    BlowUp { time: f64 },
    Partial { reason: String },
}

/// Full trace of one simulation, plus completion metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord<T> {
    pub rows: Vec<RecordRow<T>>,
    pub status: RunStatus,
    pub steps_taken: u64,
    pub wall_secs: f64,
}

impl<T: Scalar> RunRecord<T> {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            status: RunStatus::Completed,
            steps_taken: 0,
            wall_secs: 0.0,
        }
    }

    /// Rows must arrive strictly increasing in time.
    pub fn push_row(&mut self, row: RecordRow<T>) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.time <= last.time {
                return Err(Error::InvalidParameter(format!(
                    "record rows must be strictly increasing in time ({} after {})",
                    row.time, last.time
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn completed(&self) -> bool {
        matches!(self.status, RunStatus::Completed)
    }
}

impl<T: Scalar> Default for RunRecord<T> {
    fn default() -> Self {
        Self::new()
    }
}
