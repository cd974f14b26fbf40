use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use lapaware_core::session::{hex, parse_log, LogError, ReplayReport, Snapshot};
use lapaware_core::tasks::{score_session, ErrorEvent, TaskKind, TaskResult};
use serde::{Deserialize, Serialize};

/// Session summary written by `demo`, `replay` and `score`. The same session
/// yields the same report whichever command produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: TaskKind,
    pub success: bool,
    pub ticks: u64,
    pub state_hash: String,
    pub metrics: BTreeMap<String, f64>,
    pub error_events: Vec<ErrorEvent>,
}

impl Report {
    pub fn new(result: TaskResult, ticks: u64, state_hash: u64) -> Report {
        Report {
            task: result.task,
            success: result.success,
            ticks,
            state_hash: hex(state_hash),
            metrics: result.metrics,
            error_events: result.error_events,
        }
    }

    pub fn from_replay(r: ReplayReport) -> Report {
        Report::new(r.result, r.ticks, r.state_hash)
    }

    /// Scores a log without re-simulating; tick count and state hash come
    /// from its closing snapshot.
    pub fn from_log(log: &str) -> Result<Report, LogError> {
        let result = score_session(log)?;
        let records = parse_log(log)?;
        let Some(Snapshot::End(end)) = records.last().and_then(Snapshot::of) else { return Err(LogError::Incomplete) };
        Ok(Report {
            task: result.task,
            success: result.success,
            ticks: end.ticks,
            state_hash: end.state_hash,
            metrics: result.metrics,
            error_events: result.error_events,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).with_context(|| format!("cannot write report {}", path.display()))
    }
}
