use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::Fnv1a;
use crate::sim::SimConfig;
use crate::tasks::TaskKind;

/// Version written into every start snapshot.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("log is incomplete: missing start or end snapshot")]
    Incomplete,
    #[error("malformed log line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("tick {tick} is earlier than the previous record")]
    OutOfOrder { tick: u64 },
    #[error("snapshot mismatch: {0}")]
    SnapshotMismatch(String),
    #[error("replay diverged at tick {0}")]
    DivergenceAt(u64),
    #[error("log is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Control,
    Contact,
    Perception,
    Tuple,
    Feedback,
    TaskEvent,
    Snapshot,
}

/// One NDJSON line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub tick: u64,
    pub kind: RecordKind,
    pub payload: Value,
}

impl LogRecord {
    pub fn new(tick: u64, kind: RecordKind, payload: impl Serialize) -> LogRecord {
        LogRecord { tick, kind, payload: serde_json::to_value(payload).expect("log payloads serialize") }
    }

    /// The record as written, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSnapshot {
    pub format_version: u32,
    /// Scene hash, 16 lowercase hex digits.
    pub scene_hash: String,
    pub task: TaskKind,
    pub seed: u64,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndSnapshot {
    pub state_hash: String,
    pub ticks: u64,
    pub metrics: BTreeMap<String, f64>,
    pub success: bool,
    /// FNV-1a over every preceding line, newlines included.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Snapshot {
    Start(StartSnapshot),
    End(EndSnapshot),
}

impl Snapshot {
    pub fn of(record: &LogRecord) -> Option<Snapshot> {
        if record.kind != RecordKind::Snapshot {
            return None;
        }
        serde_json::from_value(record.payload.clone()).ok()
    }
}

pub fn hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Running digest of emitted lines.
#[derive(Debug, Clone, Default)]
pub struct LogDigest(Fnv1a);

impl LogDigest {
    pub fn new() -> LogDigest {
        LogDigest(Fnv1a::new())
    }

    pub fn push_line(&mut self, line: &str) {
        self.0.write(line.as_bytes());
        self.0.write_u8(b'\n');
    }

    pub fn finish(&self) -> u64 {
        self.0.finish()
    }
}

/// Parses and checks a complete log: one record per line, ticks
/// non-decreasing, a start snapshot first, an end snapshot last and nowhere
/// else, and an end digest that matches the lines before it.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LogError> {
    parse_records(text, true)
}

/// Like [`parse_log`], but leaves the end digest unchecked. Replay uses this
/// so a tampered log fails at the first line that differs.
pub(crate) fn parse_records(text: &str, verify_digest: bool) -> Result<Vec<LogRecord>, LogError> {
    if text.is_empty() || !text.ends_with('\n') {
        return Err(LogError::Incomplete);
    }
    let mut digest = LogDigest::new();
    let mut records = Vec::new();
    let mut last_tick = 0;
    let count = text.lines().count();
    for (i, line) in text.lines().enumerate() {
        let r: LogRecord =
            serde_json::from_str(line).map_err(|e| LogError::Malformed { line: i + 1, msg: e.to_string() })?;
        if r.tick < last_tick {
            return Err(LogError::Malformed { line: i + 1, msg: format!("tick {} after {last_tick}", r.tick) });
        }
        last_tick = r.tick;
        match (i, Snapshot::of(&r)) {
            (0, Some(Snapshot::Start(s))) => {
                if s.format_version != FORMAT_VERSION {
                    return Err(LogError::Malformed {
                        line: 1,
                        msg: format!("unsupported format version {}", s.format_version),
                    });
                }
            }
            (0, _) => {
                return Err(LogError::Malformed { line: 1, msg: "first record must be the start snapshot".into() })
            }
            (_, Some(Snapshot::End(end))) => {
                if verify_digest && end.digest != hex(digest.finish()) {
                    return Err(LogError::Corrupt(format!("digest {} does not match the log", end.digest)));
                }
                if i + 1 != count {
                    return Err(LogError::Malformed { line: i + 2, msg: "record after the end snapshot".into() });
                }
            }
            (_, Some(Snapshot::Start(_))) => {
                return Err(LogError::Malformed { line: i + 1, msg: "second start snapshot".into() })
            }
            (_, None) if r.kind == RecordKind::Snapshot => {
                return Err(LogError::Malformed { line: i + 1, msg: "unrecognized snapshot".into() })
            }
            _ => {}
        }
        digest.push_line(line);
        records.push(r);
    }
    match records.last().and_then(Snapshot::of) {
        Some(Snapshot::End(_)) if records.len() >= 2 => Ok(records),
        _ => Err(LogError::Incomplete),
    }
}

/// Appends records to a writer, one line each, flushing after every line so
/// a crash loses at most the line being written.
pub struct Recorder<W: Write> {
    out: W,
    last_tick: u64,
    lines: u64,
}

impl<W: Write> Recorder<W> {
    pub fn new(out: W) -> Recorder<W> {
        Recorder { out, last_tick: 0, lines: 0 }
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        if record.tick < self.last_tick {
            return Err(LogError::OutOfOrder { tick: record.tick });
        }
        let mut line = record.to_line();
        line.push('\n');
        self.out.write_all(line.as_bytes())?;
        self.out.flush()?;
        self.last_tick = record.tick;
        self.lines += 1;
        Ok(())
    }

    pub fn append_all<'a>(&mut self, records: impl IntoIterator<Item = &'a LogRecord>) -> Result<(), LogError> {
        records.into_iter().try_for_each(|r| self.append(r))
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
