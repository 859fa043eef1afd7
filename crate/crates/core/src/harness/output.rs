//! CSV persistence of traces and aggregates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{AggregateRow, RegretTrace, TracePoint};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    policy: String,
    seed: u64,
    checkpoint: u64,
    online_regret: f64,
    offline_regret: f64,
    chosen_action_json: String,
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[RegretTrace]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for t in traces {
        for p in &t.points {
            w.serialize(TraceRecord {
                policy: t.policy.clone(),
                seed: t.seed,
                checkpoint: p.checkpoint,
                online_regret: p.online_regret,
                offline_regret: p.offline_regret,
                chosen_action_json: serde_json::to_string(&p.action)?,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_traces`]; rows of the same (policy, seed) are regrouped.
pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<RegretTrace>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut traces: Vec<RegretTrace> = Vec::new();
    for rec in r.deserialize() {
        let rec: TraceRecord = rec?;
        let point = TracePoint {
            checkpoint: rec.checkpoint,
            online_regret: rec.online_regret,
            offline_regret: rec.offline_regret,
            action: serde_json::from_str(&rec.chosen_action_json)?,
        };
        match traces.iter_mut().find(|t| t.policy == rec.policy && t.seed == rec.seed) {
            Some(t) => t.points.push(point),
            None => traces.push(RegretTrace {
                policy: rec.policy,
                seed: rec.seed,
                points: vec![point],
            }),
        }
    }
    Ok(traces)
}

pub fn write_aggregate(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!("checked io kind");
    }
    Error::Csv(e)
}
