//! Run metrics: nearest-rank percentiles, the benchmark report, and its CSV
//! serialization.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("empty sample set")]
    EmptySamples,
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Nearest-rank percentile: the value at index `ceil(q * n)` (1-based) of the
/// sorted samples, `q` in (0, 1].
pub fn percentile(samples: &[Duration], q: f64) -> Result<Duration, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    assert!(q > 0.0 && q <= 1.0, "q must be in (0, 1]");
    let mut sorted: Vec<Duration> = samples.to_vec();
    sorted.sort_unstable();
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Latency summary of one operation class.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpStats {
    pub total: u64,
    pub per_second: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

impl OpStats {
    pub fn from_samples(samples: &[Duration], elapsed: Duration) -> OpStats {
        if samples.is_empty() {
            return OpStats::default();
        }
        let p50 = percentile(samples, 0.50).expect("non-empty");
        let p99 = percentile(samples, 0.99).expect("non-empty");
        OpStats {
            total: samples.len() as u64,
            per_second: samples.len() as f64 / elapsed.as_secs_f64().max(1e-9),
            p50_ms: ms(p50),
            p99_ms: ms(p99),
        }
    }
}

/// Everything a benchmark run reports.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub semantics: String,
    pub model: String,
    pub shards: u32,
    pub actors: u64,
    pub cells: u32,
    pub snapshot_interval_ms: u64,
    pub sensing_pct: f64,
    pub query_ratio: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub moves: OpStats,
    pub queries: OpStats,
    pub reactions: OpStats,
    pub snapshot_rounds: u64,
    pub query_retries: u64,
    pub query_unstable: u64,
    /// Fraction of oracle decisions that were inherently ambiguous; NaN when
    /// the run was not verified.
    pub ambiguous_fraction: f64,
    pub config_hash: u64,
    pub wall_elapsed: Duration,
}

impl MetricsReport {
    pub fn config_hash_of(text: &str) -> u64 {
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        h.finish()
    }

    pub const CSV_HEADER: &'static str = "semantics,model,shards,actors,cells,snapshot_interval_ms,\
sensing_pct,query_ratio,seed,duration_s,moves_total,moves_per_s,move_p50_ms,move_p99_ms,\
queries_total,queries_per_s,query_p50_ms,query_p99_ms,reactions_total,reactions_per_s,\
reaction_p50_ms,reaction_p99_ms,snapshot_rounds,query_retries,ambiguous_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{:.3},{},{:.3},{},{:.3},{:.3},{:.3},{},{:.3},{:.3},{:.3},{},{:.3},{:.3},{:.3},{},{},{:.3}",
            self.semantics,
            self.model,
            self.shards,
            self.actors,
            self.cells,
            self.snapshot_interval_ms,
            self.sensing_pct,
            self.query_ratio,
            self.seed,
            self.duration_s,
            self.moves.total,
            self.moves.per_second,
            self.moves.p50_ms,
            self.moves.p99_ms,
            self.queries.total,
            self.queries.per_second,
            self.queries.p50_ms,
            self.queries.p99_ms,
            self.reactions.total,
            self.reactions.per_second,
            self.reactions.p50_ms,
            self.reactions.p99_ms,
            self.snapshot_rounds,
            self.query_retries,
            self.ambiguous_fraction,
        )
    }

    /// Appends one row, writing the header only when the file is new or
    /// empty.
    pub fn emit_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let io_err = |source| MetricsError::Io { path: path.display().to_string(), source };
        let need_header = match std::fs::metadata(path) {
            Ok(meta) => meta.len() == 0,
            Err(_) => true,
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        if need_header {
            writeln!(file, "{}", Self::CSV_HEADER).map_err(io_err)?;
        }
        writeln!(file, "{}", self.csv_row()).map_err(io_err)?;
        Ok(())
    }

    /// One human-readable block, mirroring the CSV fields.
    pub fn render_text(&self) -> String {
        format!(
            "run: semantics={} model={} shards={} actors={} cells={} interval={}ms sensing={:.1}% queries={:.0}% seed={} config_hash={:016x}\n\
             moves:     {:>9} total  {:>10.1}/s  p50 {:>8.3} ms  p99 {:>8.3} ms\n\
             queries:   {:>9} total  {:>10.1}/s  p50 {:>8.3} ms  p99 {:>8.3} ms  retries {}  unstable {}\n\
             reactions: {:>9} total  {:>10.1}/s  p50 {:>8.3} ms  p99 {:>8.3} ms\n\
             snapshot rounds: {}  ambiguous fraction: {}  wall: {:.2}s",
            self.semantics,
            self.model,
            self.shards,
            self.actors,
            self.cells,
            self.snapshot_interval_ms,
            self.sensing_pct * 100.0,
            self.query_ratio * 100.0,
            self.seed,
            self.config_hash,
            self.moves.total,
            self.moves.per_second,
            self.moves.p50_ms,
            self.moves.p99_ms,
            self.queries.total,
            self.queries.per_second,
            self.queries.p50_ms,
            self.queries.p99_ms,
            self.query_retries,
            self.query_unstable,
            self.reactions.total,
            self.reactions.per_second,
            self.reactions.p50_ms,
            self.reactions.p99_ms,
            self.snapshot_rounds,
            if self.ambiguous_fraction.is_nan() {
                "n/a".to_string()
            } else {
                format!("{:.4}", self.ambiguous_fraction)
            },
            self.wall_elapsed.as_secs_f64(),
        )
    }
}

/// Parses one CSV data row back into the numeric fields (used by tests and
/// downstream tooling).
pub fn parse_csv_row(row: &str) -> Option<Vec<String>> {
    let fields: Vec<String> = row.split(',').map(|s| s.to_string()).collect();
    if fields.len() == MetricsReport::CSV_HEADER.split(',').count() {
        Some(fields)
    } else {
        None
    }
}
