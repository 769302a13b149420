//! Geometry and space-partitioning primitives for an in-memory moving-object
//! platform.
//!
//! This crate is `no_std` + `alloc`: everything here is pure computation over
//! plain values, so it can be reused from any execution context. IO, actors,
//! and clocks live in the companion `roam-engine` crate.
//!
//! Contents:
//! - [`geom`]: points, segments, envelopes, convex polygons (fences),
//!   itineraries, and the cross/cover/overlap predicates.
//! - [`grid`]: uniform grid partitioning of a bounded space into cells, plus
//!   KD-style assignment of cells to shards.
//! - [`rtree`]: a small in-memory R-tree over points, used per grid cell.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod geom;
pub mod grid;
pub mod rtree;

pub use geom::{Nanos, 
    accumulated_fence, convex_hull, eval_predicate, eval_predicate_path, ConvexPolygon, Envelope,
    GeomError, Itinerary, Point, Predicate, Segment,
};
pub use grid::{build_placement, CellId, GridConfig, GridError, PlacementMap};
pub use rtree::RTree;
