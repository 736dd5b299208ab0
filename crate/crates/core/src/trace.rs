//! CSV traces: one row per record, a `time` column in seconds, one column
//! per input (tuple inputs spread over `name.0`, `name.1`, ...). Empty cells
//! leave the input inactive for that record.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::mpsc::UnboundedSender;
use tokio::time::Instant;

use crate::lang::Spec;
use crate::protocol::FeedItem;
use crate::value::ValueType;
use crate::{Event, StreamValue};

pub type TraceRecord = Event;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no `time` column")]
    MissingTimeColumn,
    #[error("line {line}: timestamp decreases or is invalid")]
    NonMonotoneTime { line: u64 },
    #[error("line {line}, column `{column}`: cannot read `{cell}` as {expected}")]
    TypeMismatch { line: u64, column: String, cell: String, expected: &'static str },
    #[error("line {line}: tuple input `{stream}` is only partially filled")]
    PartialTuple { line: u64, stream: String },
    #[error("column `{0}` is not an input of the specification")]
    UnknownColumn(String),
    #[error("input `{0}` is missing tuple components in the header")]
    IncompleteHeader(String),
    #[error("line {line}: record activates no input")]
    EmptyRecord { line: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

enum Column {
    Time,
    Scalar { stream: String, ty: ValueType },
    Component { stream: String, k: u8 },
}

pub fn read_trace(path: impl AsRef<Path>, spec: &Spec) -> Result<Vec<TraceRecord>, TraceError> {
    read_trace_from(std::fs::File::open(path)?, spec)
}

pub fn read_trace_from(reader: impl Read, spec: &Spec) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = Vec::new();
    let mut arity: BTreeMap<String, (u8, Vec<u8>)> = BTreeMap::new();
    for h in headers.iter() {
        if h == "time" {
            columns.push(Column::Time);
            continue;
        }
        let (name, k) = match h.rsplit_once('.') {
            Some((n, k)) if k.parse::<u8>().is_ok() => (n, Some(k.parse::<u8>().unwrap())),
            _ => (h, None),
        };
        let decl = spec.input(name).ok_or_else(|| TraceError::UnknownColumn(h.to_string()))?;
        match (decl.value_type, k) {
            (ValueType::Tuple(n), Some(k)) if k < n => {
                arity.entry(name.to_string()).or_insert((n, Vec::new())).1.push(k);
                columns.push(Column::Component { stream: name.to_string(), k });
            }
            (ty @ (ValueType::Float | ValueType::Bool), None) => {
                columns.push(Column::Scalar { stream: name.to_string(), ty })
            }
            _ => return Err(TraceError::UnknownColumn(h.to_string())),
        }
    }
    if !columns.iter().any(|c| matches!(c, Column::Time)) {
        return Err(TraceError::MissingTimeColumn);
    }
    for (name, (n, ks)) in &arity {
        if ks.len() != *n as usize {
            return Err(TraceError::IncompleteHeader(name.clone()));
        }
    }

    let mut records = Vec::new();
    let mut last = 0.0f64;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut time = None;
        let mut values = BTreeMap::new();
        let mut parts: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
        for (col, cell) in columns.iter().zip(row.iter()) {
            let float = |column: &str| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TraceError::TypeMismatch {
                    line,
                    column: column.to_string(),
                    cell: cell.to_string(),
                    expected: "a finite number",
                })
            };
            match col {
                Column::Time => time = Some(float("time")?),
                _ if cell.is_empty() => {
                    if let Column::Component { stream, k } = col {
                        parts.entry(stream).or_insert_with(|| vec![None; arity[stream].0 as usize])[*k as usize] = None;
                    }
                }
                Column::Scalar { stream, ty: ValueType::Bool } => {
                    let b = match cell {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(TraceError::TypeMismatch {
                                line,
                                column: stream.clone(),
                                cell: cell.to_string(),
                                expected: "`true` or `false`",
                            })
                        }
                    };
                    values.insert(stream.clone(), StreamValue::Bool(b));
                }
                Column::Scalar { stream, .. } => {
                    values.insert(stream.clone(), StreamValue::Float(float(stream)?));
                }
                Column::Component { stream, k } => {
                    let v = float(&format!("{stream}.{k}"))?;
                    parts.entry(stream).or_insert_with(|| vec![None; arity[stream].0 as usize])[*k as usize] = Some(v);
                }
            }
        }
        for (stream, comps) in parts {
            match comps.iter().filter(|c| c.is_some()).count() {
                0 => {}
                n if n == comps.len() => {
                    values.insert(stream.to_string(), StreamValue::Tuple(comps.into_iter().flatten().collect()));
                }
                _ => return Err(TraceError::PartialTuple { line, stream: stream.to_string() }),
            }
        }
        let time = time.ok_or(TraceError::NonMonotoneTime { line })?;
        if time < last || time < 0.0 {
            return Err(TraceError::NonMonotoneTime { line });
        }
        last = time;
        if values.is_empty() {
            return Err(TraceError::EmptyRecord { line });
        }
        records.push(Event { time, values });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplayMode {
    AsFast,
    /// Trace seconds per wall-clock second.
    Realtime(f64),
}

/// Longest wall-clock sleep between clock ticks during realtime replay.
const TICK: Duration = Duration::from_millis(100);

/// Feeds the records in order, then `TraceEnd`. In realtime mode the wall
/// clock paces delivery and `AdvanceTime` ticks let periodic streams fire
/// between records; the trace timestamps stay authoritative. Stops early if
/// the consumer hangs up.
pub async fn replay<T: From<FeedItem>>(records: Vec<TraceRecord>, feed: &UnboundedSender<T>, mode: ReplayMode) {
    let origin = Instant::now();
    let base = records.first().map_or(0.0, |r| r.time);
    for r in records {
        if let ReplayMode::Realtime(speed) = mode {
            let due = origin + Duration::from_secs_f64(((r.time - base) / speed).max(0.0));
            loop {
                let now = Instant::now();
                if now >= due {
                    break;
                }
                tokio::time::sleep((due - now).min(TICK)).await;
                let elapsed = Instant::now().saturating_duration_since(origin).as_secs_f64();
                let t = (base + elapsed * speed).min(r.time);
                if feed.send(FeedItem::AdvanceTime(t).into()).is_err() {
                    return;
                }
            }
        }
        if feed.send(FeedItem::Event(r).into()).is_err() {
            return;
        }
    }
    let _ = feed.send(FeedItem::TraceEnd.into());
}
