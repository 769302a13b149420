//! Offline checkers that validate a recorded trace against the platform's
//! concurrency semantics. Deterministic and single-threaded over the
//! time-sorted trace.
//!
//! Decisions with an inherently ambiguous outcome (an update racing a query
//! window, a sensor moving concurrently with the hop it senses) count as a
//! pass but are tallied separately, so runs can bound the ambiguous fraction.

use std::collections::{BTreeMap, HashMap, HashSet};

use roam_core::grid::GridConfig;
use roam_core::{
    convex_hull, eval_predicate_path, ConvexPolygon, Envelope, Nanos, Point, Predicate,
};

use crate::kernel::ActorId;
use crate::trace::{TraceEvent, TracePayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Ambiguous,
}

/// Outcome of one checker: `Fail` always carries a witness describing the
/// first violation found.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<String>,
    /// Decisions examined.
    pub checks: u64,
    /// Decisions that were inherently ambiguous (passed without a ruling).
    pub ambiguous: u64,
}

impl Verdict {
    fn pass(checks: u64, ambiguous: u64) -> Self {
        Verdict { status: Status::Pass, witness: None, checks, ambiguous }
    }

    fn fail(witness: String, checks: u64, ambiguous: u64) -> Self {
        Verdict { status: Status::Fail, witness: Some(witness), checks, ambiguous }
    }

    pub fn is_pass(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn ambiguous_fraction(&self) -> f64 {
        if self.checks == 0 {
            0.0
        } else {
            self.ambiguous as f64 / self.checks as f64
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),
}

#[derive(Debug, Clone)]
pub struct MoveRecord {
    pub t_u: Nanos,
    pub from: Point,
    pub to: Point,
}

#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub issuer: ActorId,
    pub qid: u64,
    pub t_s: Nanos,
    pub t_e: Nanos,
    pub range: Envelope,
    pub versions: Vec<(u32, u64)>,
    pub result: Vec<(u64, Point)>,
    pub retries: u32,
}

#[derive(Debug, Clone)]
pub struct SensingSpan {
    pub from: Nanos,
    pub until: Nanos,
    pub predicate: Predicate,
    pub fence_side: f64,
    pub offset: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ReactionRecord {
    pub sensor: u64,
    pub mover: u64,
    pub mover_t_u: Nanos,
    pub trigger: Nanos,
    pub epoch: Option<u64>,
}

/// Indexed view over a trace; built once, shared by all checkers.
pub struct TraceModel {
    /// Move history per moving-actor key, time-ordered. The first record of
    /// each actor is its initial placement (from == to).
    pub moves: BTreeMap<u64, Vec<MoveRecord>>,
    pub queries: Vec<QueryRecord>,
    pub sensing: BTreeMap<u64, Vec<SensingSpan>>,
    pub reactions: Vec<ReactionRecord>,
    /// Flush times per actor: epoch -> local flush instant.
    pub flushes: BTreeMap<u64, BTreeMap<u64, Nanos>>,
    /// SnapshotApplied events per epoch: cell -> (version, residents).
    pub applied: BTreeMap<u64, BTreeMap<u32, (u64, u32)>>,
}

impl TraceModel {
    pub fn build(trace: &[TraceEvent]) -> Result<TraceModel, OracleError> {
        let mut moves: BTreeMap<u64, Vec<MoveRecord>> = BTreeMap::new();
        let mut query_starts: HashMap<u64, (ActorId, Nanos, Envelope)> = HashMap::new();
        let mut queries = Vec::new();
        let mut sensing: BTreeMap<u64, Vec<SensingSpan>> = BTreeMap::new();
        let mut reactions = Vec::new();
        let mut flushes: BTreeMap<u64, BTreeMap<u64, Nanos>> = BTreeMap::new();
        let mut applied: BTreeMap<u64, BTreeMap<u32, (u64, u32)>> = BTreeMap::new();
        for ev in trace {
            match &ev.payload {
                TracePayload::MoveDone { from, to } => {
                    let hist = moves.entry(ev.actor.key).or_default();
                    if let Some(last) = hist.last() {
                        if ev.time <= last.t_u {
                            return Err(OracleError::IncompleteTrace(format!(
                                "non-monotone MoveDone times for {}",
                                ev.actor
                            )));
                        }
                    }
                    hist.push(MoveRecord { t_u: ev.time, from: *from, to: *to });
                }
                TracePayload::QueryStart { qid, range } => {
                    query_starts.insert(*qid, (ev.actor, ev.time, *range));
                }
                TracePayload::QueryEnd { qid, retries, versions, result } => {
                    let (issuer, t_s, range) = query_starts.remove(qid).ok_or_else(|| {
                        OracleError::IncompleteTrace(format!("QueryEnd {qid} without QueryStart"))
                    })?;
                    queries.push(QueryRecord {
                        issuer,
                        qid: *qid,
                        t_s,
                        t_e: ev.time,
                        range,
                        versions: versions.iter().map(|(c, v)| (c.0, *v)).collect(),
                        result: result.clone(),
                        retries: *retries,
                    });
                }
                TracePayload::ReactionFired { mover, mover_t_u, epoch } => {
                    reactions.push(ReactionRecord {
                        sensor: ev.actor.key,
                        mover: *mover,
                        mover_t_u: *mover_t_u,
                        trigger: ev.time,
                        epoch: *epoch,
                    });
                }
                TracePayload::FlushSent { epoch, .. } => {
                    flushes.entry(ev.actor.key).or_default().insert(*epoch, ev.time);
                }
                TracePayload::SnapshotApplied { epoch, version, residents } => {
                    applied
                        .entry(*epoch)
                        .or_default()
                        .insert(ev.actor.key as u32, (*version, *residents));
                }
                TracePayload::SensingOn { predicate, fence_side, offset } => {
                    let spans = sensing.entry(ev.actor.key).or_default();
                    if let Some(open) = spans.last_mut() {
                        if open.until == Nanos::MAX {
                            open.until = ev.time; // replaced in place
                        }
                    }
                    spans.push(SensingSpan {
                        from: ev.time,
                        until: Nanos::MAX,
                        predicate: *predicate,
                        fence_side: *fence_side,
                        offset: *offset,
                    });
                }
                TracePayload::SensingOff => {
                    if let Some(spans) = sensing.get_mut(&ev.actor.key) {
                        if let Some(open) = spans.last_mut() {
                            if open.until == Nanos::MAX {
                                open.until = ev.time;
                            }
                        }
                    }
                }
            }
        }
        Ok(TraceModel { moves, queries, sensing, reactions, flushes, applied })
    }

    /// Location of an actor as of time `t` (the `to` of its last move with
    /// `t_u < t`), together with that move's completion time.
    pub fn location_before(&self, actor: u64, t: Nanos) -> Option<(Point, Nanos)> {
        let hist = self.moves.get(&actor)?;
        let idx = hist.partition_point(|m| m.t_u < t);
        if idx == 0 {
            None
        } else {
            let m = &hist[idx - 1];
            Some((m.to, m.t_u))
        }
    }

    /// Moves of an actor with `t_u` in `[lo, hi]`.
    pub fn moves_in(&self, actor: u64, lo: Nanos, hi: Nanos) -> &[MoveRecord] {
        let Some(hist) = self.moves.get(&actor) else {
            return &[];
        };
        let a = hist.partition_point(|m| m.t_u < lo);
        let b = hist.partition_point(|m| m.t_u <= hi);
        &hist[a..b]
    }

    pub fn sensing_span_at(&self, actor: u64, t: Nanos) -> Option<&SensingSpan> {
        self.sensing
            .get(&actor)?
            .iter()
            .find(|s| s.from <= t && t < s.until)
    }

    /// True when sensing stays enabled (same span) through `[lo, hi]`.
    pub fn sensing_covers(&self, actor: u64, lo: Nanos, hi: Nanos) -> Option<&SensingSpan> {
        self.sensing
            .get(&actor)?
            .iter()
            .find(|s| s.from <= lo && hi < s.until)
    }

    /// Fences the sensor held at any instant of `[lo, hi]`.
    pub fn fences_during(&self, sensor: u64, span: &SensingSpan, lo: Nanos, hi: Nanos) -> Vec<ConvexPolygon> {
        let mut centers: Vec<Point> = Vec::new();
        if let Some((p, _)) = self.location_before(sensor, lo.saturating_add(1)) {
            centers.push(p);
        }
        for m in self.moves_in(sensor, lo, hi) {
            centers.push(m.to);
        }
        centers
            .into_iter()
            .map(|c| {
                ConvexPolygon::axis_aligned_square(
                    c.offset(span.offset.0, span.offset.1),
                    span.fence_side,
                )
            })
            .collect()
    }
}

fn fmt_point(p: Point) -> String {
    format!("({:.3}, {:.3})", p.x, p.y)
}

/// Transient slack for cell-crossing moves: a move completing this soon
/// after the query window can have removed its old-cell entry inside it, so
/// the actor may be legitimately absent from the result.
pub const CROSS_CELL_TRANSIENT_SLACK: Nanos = 1_000_000_000;

/// Validates one query against the freshness contract: updates completed
/// before the window are reflected exactly; updates inside the window make
/// membership mandatory only when every window location agrees, with
/// cross-cell transitions (including one completing just after the window)
/// treated as ambiguous; every returned point must be a reported location.
pub fn check_fresh_query(model: &TraceModel, grid: &GridConfig, q: &QueryRecord) -> Verdict {
    let mut checks = 0;
    let mut ambiguous = 0;
    let in_result: HashMap<u64, Point> = q.result.iter().copied().collect();
    for &actor in model.moves.keys() {
        checks += 1;
        let Some((loc_start, _)) = model.location_before(actor, q.t_s) else {
            // Actor appeared after the query started: ambiguous by arrival.
            ambiguous += 1;
            continue;
        };
        let crossing_soon_after = model
            .moves_in(actor, q.t_e + 1, q.t_e.saturating_add(CROSS_CELL_TRANSIENT_SLACK))
            .iter()
            .any(|m| grid.cell_of(m.from) != grid.cell_of(m.to));
        let window = model.moves_in(actor, q.t_s, q.t_e);
        let present = in_result.get(&actor).copied();
        if window.is_empty() {
            let should = q.range.contains(loc_start);
            match (should, present) {
                (true, None) => {
                    if crossing_soon_after {
                        ambiguous += 1;
                        continue;
                    }
                    return Verdict::fail(
                        format!(
                            "query {} [{}..{}]: actor {actor} at {} inside the range since before t_s is missing",
                            q.qid, q.t_s, q.t_e, fmt_point(loc_start)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                (false, Some(p)) => {
                    return Verdict::fail(
                        format!(
                            "query {}: actor {actor} reported at {} is outside the range but returned at {}",
                            q.qid, fmt_point(loc_start), fmt_point(p)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                (true, Some(p)) if p != loc_start => {
                    return Verdict::fail(
                        format!(
                            "query {}: actor {actor} returned at {} but its only reported location is {}",
                            q.qid, fmt_point(p), fmt_point(loc_start)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                _ => {}
            }
            continue;
        }
        // Window updates: gather every location the actor held in the window.
        let mut locations = vec![loc_start];
        locations.extend(window.iter().map(|m| m.to));
        let all_in = locations.iter().all(|p| q.range.contains(*p));
        let none_in = locations.iter().all(|p| !q.range.contains(*p));
        let crossed_cells = window.iter().any(|m| grid.cell_of(m.from) != grid.cell_of(m.to));
        if let Some(p) = present {
            if !locations.contains(&p) {
                return Verdict::fail(
                    format!(
                        "query {}: actor {actor} returned at {} which matches no location reported before t_e",
                        q.qid, fmt_point(p)
                    ),
                    checks,
                    ambiguous,
                );
            }
        }
        if all_in && !crossed_cells && !crossing_soon_after {
            if present.is_none() {
                return Verdict::fail(
                    format!(
                        "query {}: actor {actor} stayed inside the range through the window but is missing",
                        q.qid
                    ),
                    checks,
                    ambiguous,
                );
            }
        } else if none_in {
            if let Some(p) = present {
                return Verdict::fail(
                    format!(
                        "query {}: actor {actor} never inside the range during the window but returned at {}",
                        q.qid, fmt_point(p)
                    ),
                    checks,
                    ambiguous,
                );
            }
        } else {
            ambiguous += 1;
        }
    }
    Verdict::pass(checks, ambiguous)
}

pub fn check_fresh_queries(model: &TraceModel, grid: &GridConfig) -> Verdict {
    let mut checks = 0;
    let mut ambiguous = 0;
    for q in &model.queries {
        let v = check_fresh_query(model, grid, q);
        checks += v.checks;
        ambiguous += v.ambiguous;
        if v.status == Status::Fail {
            return Verdict { checks, ambiguous, ..v };
        }
    }
    Verdict::pass(checks, ambiguous)
}

/// Delivery slack assumed when demanding a mandatory reaction: the hop must
/// satisfy the predicate against every fence the sensor holds for this long
/// after the move completes. In-process delivery is orders of magnitude
/// faster.
pub const FRESH_REACTION_SLACK: Nanos = 1_000_000_000;

/// Validates Fresh-semantics reactions: a hop satisfying the predicate
/// against every fence the sensor held around the move must fire exactly
/// once; a recorded reaction must be justified by some such fence; sensors
/// never react to themselves.
pub fn check_fresh_reactions(model: &TraceModel, _grid: &GridConfig) -> Verdict {
    let mut checks = 0;
    let mut ambiguous = 0;

    // Index recorded reactions by (sensor, mover, t_u).
    let mut fired: HashMap<(u64, u64, Nanos), u32> = HashMap::new();
    for r in &model.reactions {
        if r.epoch.is_some() {
            continue;
        }
        if r.sensor == r.mover {
            return Verdict::fail(format!("actor {} reacted to itself", r.sensor), checks, ambiguous);
        }
        *fired.entry((r.sensor, r.mover, r.mover_t_u)).or_default() += 1;
    }
    for (&(sensor, mover, t_u), &count) in fired.iter() {
        if count > 1 {
            return Verdict::fail(
                format!("duplicate reaction: sensor {sensor} fired {count} times for mover {mover} at t_u {t_u}"),
                checks,
                ambiguous,
            );
        }
    }

    // Spurious reactions: some fence held in [t_u, trigger] must satisfy the
    // predicate, with sensing enabled at the trigger.
    for r in &model.reactions {
        if r.epoch.is_some() {
            continue;
        }
        checks += 1;
        let Some(span) = model.sensing_span_at(r.sensor, r.trigger) else {
            return Verdict::fail(
                format!("sensor {} fired at {} while sensing was off", r.sensor, r.trigger),
                checks,
                ambiguous,
            );
        };
        let hop = model
            .moves_in(r.mover, r.mover_t_u, r.mover_t_u)
            .first()
            .cloned();
        let Some(hop) = hop else {
            return Verdict::fail(
                format!(
                    "sensor {} reacted to mover {} at t_u {} but no such move exists",
                    r.sensor, r.mover, r.mover_t_u
                ),
                checks,
                ambiguous,
            );
        };
        let fences = model.fences_during(r.sensor, span, r.mover_t_u, r.trigger);
        let path = [hop.from, hop.to];
        if !fences.iter().any(|f| eval_predicate_path(span.predicate, &path, f)) {
            return Verdict::fail(
                format!(
                    "spurious reaction: sensor {} fired for mover {} hop {}->{} satisfying no fence",
                    r.sensor,
                    r.mover,
                    fmt_point(hop.from),
                    fmt_point(hop.to)
                ),
                checks,
                ambiguous,
            );
        }
    }

    // Mandatory reactions: for every (sensing actor, mover hop) where the
    // predicate holds against every fence the sensor held during the
    // delivery window, a reaction must exist. A bounding-box prescreen skips
    // pairs that cannot interact (disjoint boxes satisfy no predicate, and a
    // recorded reaction for such a pair is already rejected above).
    for (&sensor, spans) in model.sensing.iter() {
        for span in spans {
            for (&mover, hist) in model.moves.iter() {
                if mover == sensor {
                    continue;
                }
                for m in hist {
                    if m.from == m.to {
                        continue; // initial placement
                    }
                    let hi = m.t_u.saturating_add(FRESH_REACTION_SLACK);
                    if m.t_u < span.from || hi >= span.until {
                        continue; // sensing not stable across the window
                    }
                    checks += 1;
                    if !sensor_reach(model, sensor, span, m.t_u, hi)
                        .map(|reach| {
                            let mut hop_box = Envelope::of_point(m.from);
                            hop_box.expand_to(m.to);
                            reach.intersects(&hop_box)
                        })
                        .unwrap_or(false)
                    {
                        continue;
                    }
                    let fences = model.fences_during(sensor, span, m.t_u, hi);
                    let path = [m.from, m.to];
                    let must = !fences.is_empty()
                        && fences.iter().all(|f| eval_predicate_path(span.predicate, &path, f));
                    let any = fences.iter().any(|f| eval_predicate_path(span.predicate, &path, f));
                    let got = fired.contains_key(&(sensor, mover, m.t_u));
                    if must && !got {
                        return Verdict::fail(
                            format!(
                                "missing reaction: mover {mover} hop {}->{} at {} satisfies {} against every fence of sensor {sensor}",
                                fmt_point(m.from),
                                fmt_point(m.to),
                                m.t_u,
                                span.predicate
                            ),
                            checks,
                            ambiguous,
                        );
                    }
                    if any && !must {
                        ambiguous += 1;
                    }
                }
            }
        }
    }
    Verdict::pass(checks, ambiguous)
}

/// Bounding box of every fence the sensor holds in `[lo, hi]`, without
/// building the fence polygons.
fn sensor_reach(
    model: &TraceModel,
    sensor: u64,
    span: &SensingSpan,
    lo: Nanos,
    hi: Nanos,
) -> Option<Envelope> {
    let (start, _) = model.location_before(sensor, lo.saturating_add(1))?;
    let mut centers = Envelope::of_point(start);
    for m in model.moves_in(sensor, lo, hi) {
        centers.expand_to(m.to);
    }
    let h = span.fence_side / 2.0;
    Some(Envelope::new(
        Point::new(centers.min.x + span.offset.0 - h, centers.min.y + span.offset.1 - h),
        Point::new(centers.max.x + span.offset.0 + h, centers.max.y + span.offset.1 + h),
    ))
}

/// Epochs for which every cell of the grid reported a snapshot application.
pub fn complete_epochs(model: &TraceModel, grid: &GridConfig) -> Vec<u64> {
    model
        .applied
        .iter()
        .filter(|(_, cells)| cells.len() == grid.cell_count() as usize)
        .map(|(e, _)| *e)
        .collect()
}

/// Expected snapshot content for an actor at a given epoch: the target of its
/// last move strictly before its local flush for that epoch. Epoch 0 is the
/// initial placement.
fn expected_location(model: &TraceModel, actor: u64, epoch: u64) -> Option<Point> {
    if epoch == 0 {
        return model.moves.get(&actor).and_then(|h| h.first()).map(|m| m.to);
    }
    let t_i = *model.flushes.get(&actor)?.get(&epoch)?;
    model.location_before(actor, t_i).map(|(p, _)| p)
}

/// Validates snapshot query results: every query reads one version across
/// all its cells, and a query at version n returns exactly the actors whose
/// pre-flush location for epoch n lies in the range, at those locations.
pub fn check_snapshot_contents(model: &TraceModel, grid: &GridConfig) -> Verdict {
    let mut checks = 0;
    let mut ambiguous = 0;
    let complete: HashSet<u64> = complete_epochs(model, grid).into_iter().collect();
    for q in &model.queries {
        if q.versions.windows(2).any(|w| w[0].1 != w[1].1) {
            return Verdict::fail(
                format!("query {} read mixed versions {:?}", q.qid, q.versions),
                checks,
                ambiguous,
            );
        }
        let Some(&(_, version)) = q.versions.first() else {
            continue;
        };
        if version != 0 && !complete.contains(&version) {
            // The round was still in flight when the run ended.
            ambiguous += 1;
            continue;
        }
        let in_result: HashMap<u64, Point> = q.result.iter().copied().collect();
        for &actor in model.moves.keys() {
            checks += 1;
            let Some(expected) = expected_location(model, actor, version) else {
                if let Some(p) = in_result.get(&actor) {
                    return Verdict::fail(
                        format!(
                            "query {} (version {version}): actor {actor} returned at {} though it never flushed epoch {version}",
                            q.qid, fmt_point(*p)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                ambiguous += 1;
                continue;
            };
            let should = q.range.contains(expected);
            match (should, in_result.get(&actor)) {
                (true, None) => {
                    return Verdict::fail(
                        format!(
                            "query {} (version {version}): actor {actor} expected at {} inside the range is missing",
                            q.qid, fmt_point(expected)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                (false, Some(p)) => {
                    return Verdict::fail(
                        format!(
                            "query {} (version {version}): actor {actor} expected at {} outside the range but returned at {}",
                            q.qid, fmt_point(expected), fmt_point(*p)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                (true, Some(p)) if *p != expected => {
                    return Verdict::fail(
                        format!(
                            "query {} (version {version}): actor {actor} returned at {} but the snapshot location is {}",
                            q.qid, fmt_point(*p), fmt_point(expected)
                        ),
                        checks,
                        ambiguous,
                    );
                }
                _ => {}
            }
        }
    }
    Verdict::pass(checks, ambiguous)
}

/// Epoch window of an actor: `[flush(epoch-1), flush(epoch))` in its local
/// clock, with epoch 1 starting at its first record.
fn epoch_window(model: &TraceModel, actor: u64, epoch: u64) -> Option<(Nanos, Nanos)> {
    let flushes = model.flushes.get(&actor)?;
    let end = *flushes.get(&epoch)?;
    let start = if epoch <= 1 { 0 } else { *flushes.get(&(epoch - 1))? };
    Some((start, end))
}

/// Validates Snapshot-semantics reactions (the iff, both directions): for
/// every complete epoch, sensor, and mover, exactly one reaction fired iff
/// the mover's buffered itinerary satisfies the sensor's predicate against
/// the sensor's accumulated fence for that epoch.
pub fn check_snap_reactions(model: &TraceModel, grid: &GridConfig) -> Verdict {
    let mut checks = 0;
    let mut ambiguous = 0;
    let complete = complete_epochs(model, grid);
    let mut fired: HashMap<(u64, u64, u64), u32> = HashMap::new();
    for r in &model.reactions {
        let Some(epoch) = r.epoch else { continue };
        if r.sensor == r.mover {
            return Verdict::fail(format!("actor {} reacted to itself", r.sensor), checks, ambiguous);
        }
        if r.trigger < r.mover_t_u {
            return Verdict::fail(
                format!(
                    "reaction of sensor {} for mover {} triggered at {} before the move at {}",
                    r.sensor, r.mover, r.trigger, r.mover_t_u
                ),
                checks,
                ambiguous,
            );
        }
        *fired.entry((r.sensor, r.mover, epoch)).or_default() += 1;
    }
    for epoch in complete {
        // Buffered itinerary (and its bounding box) per mover, built once.
        let mut paths: HashMap<u64, (Vec<Point>, Envelope)> = HashMap::new();
        for &mover in model.moves.keys() {
            let Some((m_lo, m_hi)) = epoch_window(model, mover, epoch) else {
                continue;
            };
            let mut path: Vec<Point> = Vec::new();
            if let Some((p, _)) = model.location_before(mover, m_lo.saturating_add(1)) {
                path.push(p);
            }
            for m in model.moves_in(mover, m_lo, m_hi.saturating_sub(1)) {
                path.push(m.to);
            }
            if let Some(first) = path.first() {
                let mut bbox = Envelope::of_point(*first);
                for p in &path[1..] {
                    bbox.expand_to(*p);
                }
                paths.insert(mover, (path, bbox));
            }
        }
        for &sensor in model.sensing.keys() {
            // The sensor's own epoch window, under its local clock.
            let Some((win_lo, win_hi)) = epoch_window(model, sensor, epoch) else {
                continue;
            };
            // Sensing must be enabled through the epoch and its evaluation;
            // partial coverage is ambiguous (reactions may or may not fire).
            let Some(span) = model.sensing_covers(sensor, win_hi.saturating_sub(1), win_hi) else {
                ambiguous += 1;
                continue;
            };
            let acc_start = win_lo.max(span.from);
            // Accumulated fence: hull of the fences at the location held at
            // the window start and at every move inside the window.
            let mut corners: Vec<Point> = Vec::new();
            if let Some((p, _)) = model.location_before(sensor, acc_start.saturating_add(1)) {
                corners.extend_from_slice(
                    ConvexPolygon::axis_aligned_square(
                        p.offset(span.offset.0, span.offset.1),
                        span.fence_side,
                    )
                    .vertices(),
                );
            }
            for m in model.moves_in(sensor, acc_start, win_hi.saturating_sub(1)) {
                corners.extend_from_slice(
                    ConvexPolygon::axis_aligned_square(
                        m.to.offset(span.offset.0, span.offset.1),
                        span.fence_side,
                    )
                    .vertices(),
                );
            }
            if corners.is_empty() {
                ambiguous += 1;
                continue;
            }
            let acc = convex_hull(&corners).expect("fence corners are non-degenerate");
            let acc_box = acc.bounding_box();
            for (&mover, (path, path_box)) in paths.iter() {
                if mover == sensor {
                    continue;
                }
                checks += 1;
                let count = fired.get(&(sensor, mover, epoch)).copied().unwrap_or(0);
                // Disjoint boxes satisfy no predicate: only the no-reaction
                // side needs confirming.
                let must = acc_box.intersects(path_box)
                    && eval_predicate_path(span.predicate, path, &acc);
                if must && count != 1 {
                    return Verdict::fail(
                        format!(
                            "epoch {epoch}: sensor {sensor} should react exactly once to mover {mover} (itinerary of {} points satisfies {}), saw {count}",
                            path.len(),
                            span.predicate
                        ),
                        checks,
                        ambiguous,
                    );
                }
                if !must && count != 0 {
                    return Verdict::fail(
                        format!(
                            "epoch {epoch}: sensor {sensor} fired {count} reactions for mover {mover} whose itinerary does not satisfy {}",
                            span.predicate
                        ),
                        checks,
                        ambiguous,
                    );
                }
            }
        }
    }
    Verdict::pass(checks, ambiguous)
}

/// All checkers applicable to a trace, keyed by name. Snapshot traces are
/// recognized by the presence of flush events.
pub fn check_all(trace: &[TraceEvent], grid: &GridConfig) -> Result<NamedVerdicts, OracleError> {
    let model = TraceModel::build(trace)?;
    let snapshot = trace.iter().any(|e| matches!(e.payload, TracePayload::FlushSent { .. }));
    let mut out = Vec::new();
    if snapshot {
        out.push(("snapshot_contents", check_snapshot_contents(&model, grid)));
        out.push(("snapshot_reactions", check_snap_reactions(&model, grid)));
    } else {
        out.push(("fresh_queries", check_fresh_queries(&model, grid)));
        out.push(("fresh_reactions", check_fresh_reactions(&model, grid)));
    }
    Ok(out)
}

/// Named checker outcomes of one verification pass.
pub type NamedVerdicts = Vec<(&'static str, Verdict)>;

/// Convenience wrapper for callers that only need pass/fail plus the
/// ambiguous fraction.
pub fn verify_trace(
    trace: &[TraceEvent],
    grid: &GridConfig,
) -> Result<(bool, f64, NamedVerdicts), OracleError> {
    let verdicts = check_all(trace, grid)?;
    let pass = verdicts.iter().all(|(_, v)| v.is_pass());
    let checks: u64 = verdicts.iter().map(|(_, v)| v.checks).sum();
    let ambiguous: u64 = verdicts.iter().map(|(_, v)| v.ambiguous).sum();
    let fraction = if checks == 0 { 0.0 } else { ambiguous as f64 / checks as f64 };
    Ok((pass, fraction, verdicts))
}
