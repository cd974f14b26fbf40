use std::collections::BTreeMap;

use super::{hex, parse_records, LogError, LogRecord, RecordKind, Snapshot};
use crate::scene::Scene;
use crate::sim::{Simulation, ToolControl};
use crate::tasks::TaskResult;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub ticks: u64,
    pub lines: usize,
    pub state_hash: u64,
    pub result: TaskResult,
}

/// Re-runs a session from its control records and checks that every line it
/// regenerates is byte-identical to the log.
pub fn replay_log(log: &str, scene: &Scene) -> Result<ReplayReport, LogError> {
    let records = parse_records(log, false)?;
    let Some(Snapshot::Start(start)) = Snapshot::of(&records[0]) else { return Err(LogError::Incomplete) };
    let Some(Snapshot::End(end)) = records.last().and_then(Snapshot::of) else { return Err(LogError::Incomplete) };
    if start.scene_hash != hex(scene.hash()) {
        return Err(LogError::SnapshotMismatch(format!(
            "log was recorded on scene {}, replaying on {}",
            start.scene_hash,
            hex(scene.hash())
        )));
    }

    let mut controls: BTreeMap<u64, Vec<ToolControl>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.kind == RecordKind::Control {
            let c: ToolControl = serde_json::from_value(r.payload.clone())
                .map_err(|e| LogError::Malformed { line: i + 1, msg: e.to_string() })?;
            controls.entry(r.tick).or_default().push(c);
        }
    }

    let mut sim = Simulation::new(scene.clone(), start.task, start.config)
        .map_err(|e| LogError::SnapshotMismatch(e.to_string()))?;
    let logged: Vec<&str> = log.lines().collect();
    let mut cursor = Cursor { logged: &logged, records: &records, next: 0 };
    cursor.check(0, std::slice::from_ref(&sim.start_record()))?;
    for tick in 1..=end.ticks {
        let step = controls.get(&tick).map_or(&[][..], Vec::as_slice);
        let out = sim.step(step).map_err(|_| LogError::DivergenceAt(tick))?;
        cursor.check(tick, &out)?;
    }
    let (out, result) = sim.finish();
    cursor.check(end.ticks, &out)?;
    if cursor.next != logged.len() {
        return Err(LogError::DivergenceAt(records[cursor.next].tick));
    }
    Ok(ReplayReport { ticks: end.ticks, lines: logged.len(), state_hash: sim.state_hash(), result })
}

struct Cursor<'a> {
    logged: &'a [&'a str],
    records: &'a [LogRecord],
    next: usize,
}

impl Cursor<'_> {
    fn check(&mut self, tick: u64, regenerated: &[LogRecord]) -> Result<(), LogError> {
        for r in regenerated {
            match self.logged.get(self.next) {
                Some(line) if *line == r.to_line() => self.next += 1,
                Some(_) => return Err(LogError::DivergenceAt(self.records[self.next].tick.min(tick))),
                None => return Err(LogError::DivergenceAt(tick)),
            }
        }
        Ok(())
    }
}
