use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaskKind;
use crate::session::{parse_log, LogError, RecordKind, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    GraspEmptySpace,
    MisalignedCut,
    UnintendedClip,
    CutAir,
    WrongTissue,
    UnsafeDepth,
    OffCorridor,
    ShallowBite,
    DeepBite,
    BadAngle,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::GraspEmptySpace => "grasp_empty_space",
            ErrorKind::MisalignedCut => "misaligned_cut",
            ErrorKind::UnintendedClip => "unintended_clip",
            ErrorKind::CutAir => "cut_air",
            ErrorKind::WrongTissue => "wrong_tissue",
            ErrorKind::UnsafeDepth => "unsafe_depth",
            ErrorKind::OffCorridor => "off_corridor",
            ErrorKind::ShallowBite => "shallow_bite",
            ErrorKind::DeepBite => "deep_bite",
            ErrorKind::BadAngle => "bad_angle",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub tick: u64,
    pub kind: ErrorKind,
    pub tool_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: TaskKind,
    pub success: bool,
    pub metrics: BTreeMap<String, f64>,
    pub error_events: Vec<ErrorEvent>,
}

impl TaskResult {
    pub fn count(&self, kind: ErrorKind) -> usize {
        self.error_events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Error kinds that make a session fail, per task.
pub fn disqualifying(task: TaskKind) -> &'static [ErrorKind] {
    use ErrorKind::*;
    match task {
        TaskKind::Navigation => &[WrongTissue, UnsafeDepth],
        TaskKind::Manipulation => &[GraspEmptySpace, BadAngle, WrongTissue, UnintendedClip, UnsafeDepth],
        TaskKind::Transfer => &[OffCorridor, GraspEmptySpace, WrongTissue, UnintendedClip],
        TaskKind::Cutting => &[CutAir, MisalignedCut, WrongTissue, UnintendedClip],
        TaskKind::Suturing => &[ShallowBite, DeepBite, BadAngle, WrongTissue],
    }
}

/// Conjunctive success predicate: no disqualifying event, and
///
/// - navigation: `in_view_fraction ≥ min_fraction`;
/// - manipulation: a grasp on target with `grasp_error_m ≤ grasp_tolerance_m`;
/// - transfer: at least one handoff;
/// - cutting: at least one cut on target;
/// - suturing: the last bite hit both the entry and the exit marker.
pub fn is_success(task: TaskKind, metrics: &BTreeMap<String, f64>, events: &[ErrorEvent]) -> bool {
    if events.iter().any(|e| disqualifying(task).contains(&e.kind)) {
        return false;
    }
    let m = |k: &str| metrics.get(k).copied().unwrap_or(f64::NAN);
    match task {
        TaskKind::Navigation => m("in_view_fraction") >= m("min_fraction"),
        TaskKind::Manipulation => m("grasps_on_target") >= 1.0 && m("grasp_error_m") <= m("grasp_tolerance_m"),
        TaskKind::Transfer => m("handoffs") >= 1.0,
        TaskKind::Cutting => m("cuts_on_target") >= 1.0,
        TaskKind::Suturing => m("entry_hit") == 1.0 && m("exit_hit") == 1.0,
    }
}

/// Scores a finished session log without re-simulating: error events come
/// from its task-event records, metrics from its closing snapshot.
pub fn score_session(log: &str) -> Result<TaskResult, LogError> {
    let records = parse_log(log)?;
    let (task, metrics) = match (Snapshot::of(&records[0]), records.last().and_then(Snapshot::of)) {
        (Some(Snapshot::Start(start)), Some(Snapshot::End(end))) if records.len() >= 2 => (start.task, end.metrics),
        _ => return Err(LogError::Incomplete),
    };
    let mut error_events = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.kind == RecordKind::TaskEvent {
            let e: ErrorEvent = serde_json::from_value(r.payload.clone())
                .map_err(|e| LogError::Malformed { line: i + 1, msg: e.to_string() })?;
            error_events.push(e);
        }
    }
    let success = is_success(task, &metrics, &error_events);
    Ok(TaskResult { task, success, metrics, error_events })
}
