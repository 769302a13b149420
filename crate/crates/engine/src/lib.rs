//! In-memory, actor-partitioned platform for moving objects: location
//! updates, spatial range queries, and reactive geofencing under two
//! concurrency semantics (Fresh and Snapshot), plus benchmark workloads and
//! trace checkers that validate recorded executions against those semantics.

pub mod bench;
pub mod kernel;
pub mod metrics;
pub mod moving;
pub mod oracle;
pub mod platform;
pub mod protocol;
pub mod snapshot;
pub mod spatial;
pub mod trace;
pub mod workload;

pub use platform::{EngineError, Platform, PlatformInit};
pub use protocol::{ReactionCallback, ReactionEvent, Semantics};
