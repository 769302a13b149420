//! Append-only execution trace. Every move, query, reaction, flush, and
//! snapshot application is recorded here; the checkers in [`crate::oracle`]
//! replay the trace against the platform's concurrency semantics.
//!
//! File format (UTF-8, one event per line, sortable by leading timestamp):
//!
//! ```text
//! <time_ns> <kind> <actor_kind>:<key> <payload fields space-separated>
//! ```
//!
//! Floats carry six decimal places. Payloads per kind:
//!
//! - `MoveDone from_x from_y to_x to_y`
//! - `QueryStart qid min_x min_y max_x max_y`
//! - `QueryEnd qid retries nv cell:version.. k id x y ..`
//! - `ReactionFired mover mover_tu epoch|-`
//! - `FlushSent epoch points`
//! - `SnapshotApplied epoch version residents`
//! - `SensingOn predicate fence_side off_x off_y`
//! - `SensingOff`

use std::fmt::Write as _;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crossbeam_queue::SegQueue;
use roam_core::grid::CellId;
use roam_core::{Envelope, Nanos, Point, Predicate};

use crate::kernel::{ActorId, ActorKind};

#[derive(Debug, Clone, PartialEq)]
pub enum TracePayload {
    MoveDone {
        from: Point,
        to: Point,
    },
    QueryStart {
        qid: u64,
        range: Envelope,
    },
    QueryEnd {
        qid: u64,
        retries: u32,
        versions: Vec<(CellId, u64)>,
        result: Vec<(u64, Point)>,
    },
    ReactionFired {
        mover: u64,
        mover_t_u: Nanos,
        epoch: Option<u64>,
    },
    FlushSent {
        epoch: u64,
        points: u32,
    },
    SnapshotApplied {
        epoch: u64,
        version: u64,
        residents: u32,
    },
    SensingOn {
        predicate: Predicate,
        fence_side: f64,
        offset: (f64, f64),
    },
    SensingOff,
}

impl TracePayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TracePayload::MoveDone { .. } => "MoveDone",
            TracePayload::QueryStart { .. } => "QueryStart",
            TracePayload::QueryEnd { .. } => "QueryEnd",
            TracePayload::ReactionFired { .. } => "ReactionFired",
            TracePayload::FlushSent { .. } => "FlushSent",
            TracePayload::SnapshotApplied { .. } => "SnapshotApplied",
            TracePayload::SensingOn { .. } => "SensingOn",
            TracePayload::SensingOff => "SensingOff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: Nanos,
    pub actor: ActorId,
    pub payload: TracePayload,
}

impl TraceEvent {
    pub fn new(time: Nanos, actor: ActorId, payload: TracePayload) -> Self {
        TraceEvent { time, actor, payload }
    }
}

/// Lock-free trace collection: one append queue per shard plus one for
/// external emitters (clients, platform setup), merged and time-sorted at the
/// end of the run.
#[derive(Clone)]
pub struct TraceSink {
    queues: Arc<Vec<SegQueue<(u64, TraceEvent)>>>,
    seq: Arc<AtomicU64>,
}

impl TraceSink {
    pub fn new(shards: u32) -> Self {
        let queues = (0..=shards).map(|_| SegQueue::new()).collect();
        TraceSink { queues: Arc::new(queues), seq: Arc::new(AtomicU64::new(0)) }
    }

    pub fn push(&self, shard: Option<u32>, event: TraceEvent) {
        let idx = match shard {
            Some(s) if (s as usize) < self.queues.len() - 1 => s as usize,
            _ => self.queues.len() - 1,
        };
        let seq = self.seq.fetch_add(1, Ordering::Relaxed);
        self.queues[idx].push((seq, event));
    }

    /// Drains all queues into one trace ordered by (time, append order).
    pub fn drain_sorted(&self) -> Vec<TraceEvent> {
        let mut all: Vec<(u64, TraceEvent)> = Vec::new();
        for q in self.queues.iter() {
            while let Some(item) = q.pop() {
                all.push(item);
            }
        }
        all.sort_by_key(|(seq, ev)| (ev.time, *seq));
        all.into_iter().map(|(_, ev)| ev).collect()
    }
}

fn write_point(out: &mut String, p: Point) {
    let _ = write!(out, " {:.6} {:.6}", p.x, p.y);
}

pub fn encode_event(ev: &TraceEvent) -> String {
    let mut line = format!("{} {} {}", ev.time, ev.payload.kind_name(), ev.actor);
    match &ev.payload {
        TracePayload::MoveDone { from, to } => {
            write_point(&mut line, *from);
            write_point(&mut line, *to);
        }
        TracePayload::QueryStart { qid, range } => {
            let _ = write!(line, " {qid}");
            write_point(&mut line, range.min);
            write_point(&mut line, range.max);
        }
        TracePayload::QueryEnd { qid, retries, versions, result } => {
            let _ = write!(line, " {qid} {retries} {}", versions.len());
            for (cell, v) in versions {
                let _ = write!(line, " {cell}:{v}");
            }
            let _ = write!(line, " {}", result.len());
            for (id, p) in result {
                let _ = write!(line, " {id}");
                write_point(&mut line, *p);
            }
        }
        TracePayload::ReactionFired { mover, mover_t_u, epoch } => {
            let _ = write!(line, " {mover} {mover_t_u}");
            match epoch {
                Some(e) => {
                    let _ = write!(line, " {e}");
                }
                None => line.push_str(" -"),
            }
        }
        TracePayload::FlushSent { epoch, points } => {
            let _ = write!(line, " {epoch} {points}");
        }
        TracePayload::SnapshotApplied { epoch, version, residents } => {
            let _ = write!(line, " {epoch} {version} {residents}");
        }
        TracePayload::SensingOn { predicate, fence_side, offset } => {
            let _ = write!(line, " {} {:.6} {:.6} {:.6}", predicate.name(), fence_side, offset.0, offset.1);
        }
        TracePayload::SensingOff => {}
    }
    line
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<(), TraceIoError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for ev in events {
        writeln!(w, "{}", encode_event(ev))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEvent>, TraceIoError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_line(&line).map_err(|reason| TraceIoError::Malformed { line: idx + 1, reason })?);
    }
    events.sort_by_key(|e| e.time);
    Ok(events)
}

pub fn parse_line(line: &str) -> Result<TraceEvent, String> {
    let mut tok = line.split_whitespace();
    let mut next = |what: &str| tok.next().ok_or_else(|| format!("missing {what}"));
    let time: Nanos = next("time")?.parse().map_err(|e| format!("bad time: {e}"))?;
    let kind = next("kind")?.to_string();
    let actor_txt = next("actor")?;
    let (akind, key) = actor_txt
        .split_once(':')
        .ok_or_else(|| format!("bad actor id {actor_txt}"))?;
    let actor = ActorId {
        kind: ActorKind::parse(akind).ok_or_else(|| format!("unknown actor kind {akind}"))?,
        key: key.parse().map_err(|e| format!("bad actor key: {e}"))?,
    };
    let mut next_f64 = |what: &str| -> Result<f64, String> {
        tok.next()
            .ok_or_else(|| format!("missing {what}"))?
            .parse::<f64>()
            .map_err(|e| format!("bad {what}: {e}"))
    };
    let payload = match kind.as_str() {
        "MoveDone" => {
            let from = Point::new(next_f64("from_x")?, next_f64("from_y")?);
            let to = Point::new(next_f64("to_x")?, next_f64("to_y")?);
            TracePayload::MoveDone { from, to }
        }
        "QueryStart" => {
            let qid = tok.next().ok_or("missing qid")?.parse().map_err(|e| format!("bad qid: {e}"))?;
            let mut next_f64 = |what: &str| -> Result<f64, String> {
                tok.next()
                    .ok_or_else(|| format!("missing {what}"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad {what}: {e}"))
            };
            let min = Point::new(next_f64("min_x")?, next_f64("min_y")?);
            let max = Point::new(next_f64("max_x")?, next_f64("max_y")?);
            TracePayload::QueryStart { qid, range: Envelope::new(min, max) }
        }
        "QueryEnd" => {
            let qid = tok.next().ok_or("missing qid")?.parse().map_err(|e| format!("bad qid: {e}"))?;
            let retries = tok.next().ok_or("missing retries")?.parse().map_err(|e| format!("bad retries: {e}"))?;
            let nv: usize = tok.next().ok_or("missing nv")?.parse().map_err(|e| format!("bad nv: {e}"))?;
            let mut versions = Vec::with_capacity(nv);
            for _ in 0..nv {
                let pair = tok.next().ok_or("missing version pair")?;
                let (c, v) = pair.split_once(':').ok_or_else(|| format!("bad version pair {pair}"))?;
                versions.push((
                    CellId(c.parse().map_err(|e| format!("bad cell: {e}"))?),
                    v.parse().map_err(|e| format!("bad version: {e}"))?,
                ));
            }
            let k: usize = tok.next().ok_or("missing k")?.parse().map_err(|e| format!("bad k: {e}"))?;
            let mut result = Vec::with_capacity(k);
            for _ in 0..k {
                let id = tok.next().ok_or("missing id")?.parse().map_err(|e| format!("bad id: {e}"))?;
                let x = tok.next().ok_or("missing x")?.parse().map_err(|e| format!("bad x: {e}"))?;
                let y = tok.next().ok_or("missing y")?.parse().map_err(|e| format!("bad y: {e}"))?;
                result.push((id, Point::new(x, y)));
            }
            TracePayload::QueryEnd { qid, retries, versions, result }
        }
        "ReactionFired" => {
            let mover = tok.next().ok_or("missing mover")?.parse().map_err(|e| format!("bad mover: {e}"))?;
            let mover_t_u = tok.next().ok_or("missing mover_tu")?.parse().map_err(|e| format!("bad mover_tu: {e}"))?;
            let epoch_txt = tok.next().ok_or("missing epoch")?;
            let epoch = if epoch_txt == "-" {
                None
            } else {
                Some(epoch_txt.parse().map_err(|e| format!("bad epoch: {e}"))?)
            };
            TracePayload::ReactionFired { mover, mover_t_u, epoch }
        }
        "FlushSent" => {
            let epoch = tok.next().ok_or("missing epoch")?.parse().map_err(|e| format!("bad epoch: {e}"))?;
            let points = tok.next().ok_or("missing points")?.parse().map_err(|e| format!("bad points: {e}"))?;
            TracePayload::FlushSent { epoch, points }
        }
        "SnapshotApplied" => {
            let epoch = tok.next().ok_or("missing epoch")?.parse().map_err(|e| format!("bad epoch: {e}"))?;
            let version = tok.next().ok_or("missing version")?.parse().map_err(|e| format!("bad version: {e}"))?;
            let residents = tok.next().ok_or("missing residents")?.parse().map_err(|e| format!("bad residents: {e}"))?;
            TracePayload::SnapshotApplied { epoch, version, residents }
        }
        "SensingOn" => {
            let pred_txt = tok.next().ok_or("missing predicate")?;
            let predicate = Predicate::parse(pred_txt).ok_or_else(|| format!("unknown predicate {pred_txt}"))?;
            let fence_side = tok.next().ok_or("missing side")?.parse().map_err(|e| format!("bad side: {e}"))?;
            let ox = tok.next().ok_or("missing off_x")?.parse().map_err(|e| format!("bad off_x: {e}"))?;
            let oy = tok.next().ok_or("missing off_y")?.parse().map_err(|e| format!("bad off_y: {e}"))?;
            TracePayload::SensingOn { predicate, fence_side, offset: (ox, oy) }
        }
        "SensingOff" => TracePayload::SensingOff,
        other => return Err(format!("unknown event kind {other}")),
    };
    Ok(TraceEvent { time, actor, payload })
}
