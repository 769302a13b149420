//! Uniform grid partitioning of the bounded space into cells, and KD-style
//! assignment of cells to shards.
//!
//! Cells are half-open `[x_lo, x_hi) x [y_lo, y_hi)` for point membership so
//! that every point of the space belongs to exactly one cell; points on the
//! global max edge clamp into the last row/column. Range and segment coverage
//! use the *closed* cell extent, so a range touching a shared boundary spans
//! the cells on both sides.

use alloc::vec::Vec;
use core::fmt;

use crate::geom::{Envelope, Point, Segment};

/// Row-major cell address: `id = iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridError {
    /// Non-positive extent or zero cell counts.
    InvalidConfig,
    /// A point or range lies outside the configured space.
    OutOfBounds,
    /// Shard count is not a power of two, is zero, or exceeds the cell count.
    InvalidShardCount,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::InvalidConfig => f.write_str("invalid grid configuration"),
            GridError::OutOfBounds => f.write_str("point or range outside the space"),
            GridError::InvalidShardCount => f.write_str("shard count must be a power of two <= cell count"),
        }
    }
}

impl core::error::Error for GridError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    origin: Point,
    width: f64,
    height: f64,
    nx: u32,
    ny: u32,
}

impl GridConfig {
    pub fn new(origin: Point, width: f64, height: f64, nx: u32, ny: u32) -> Result<Self, GridError> {
        if width.is_nan() || width <= 0.0 || height.is_nan() || height <= 0.0 || nx == 0 || ny == 0 || !origin.is_finite() {
            return Err(GridError::InvalidConfig);
        }
        Ok(GridConfig { origin, width, height, nx, ny })
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn nx(&self) -> u32 {
        self.nx
    }

    pub fn ny(&self) -> u32 {
        self.ny
    }

    pub fn cell_count(&self) -> u32 {
        self.nx * self.ny
    }

    pub fn cell_width(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height / self.ny as f64
    }

    /// The whole space as a closed envelope.
    pub fn space(&self) -> Envelope {
        Envelope::new(
            self.origin,
            Point::new(self.origin.x + self.width, self.origin.y + self.height),
        )
    }

    pub fn cell_id(&self, ix: u32, iy: u32) -> CellId {
        debug_assert!(ix < self.nx && iy < self.ny);
        CellId(iy * self.nx + ix)
    }

    pub fn cell_coords(&self, c: CellId) -> (u32, u32) {
        (c.0 % self.nx, c.0 / self.nx)
    }

    /// Closed extent of a cell.
    pub fn cell_extent(&self, c: CellId) -> Envelope {
        let (ix, iy) = self.cell_coords(c);
        let cw = self.cell_width();
        let ch = self.cell_height();
        Envelope::new(
            Point::new(self.origin.x + ix as f64 * cw, self.origin.y + iy as f64 * ch),
            Point::new(
                self.origin.x + (ix + 1) as f64 * cw,
                self.origin.y + (iy + 1) as f64 * ch,
            ),
        )
    }

    /// The unique cell owning a point under the half-open rule; the global max
    /// edges clamp into the last row/column.
    pub fn cell_of(&self, p: Point) -> Result<CellId, GridError> {
        if !self.space().contains(p) {
            return Err(GridError::OutOfBounds);
        }
        let ix = self.axis_index(p.x - self.origin.x, self.cell_width(), self.nx);
        let iy = self.axis_index(p.y - self.origin.y, self.cell_height(), self.ny);
        Ok(self.cell_id(ix, iy))
    }

    fn axis_index(&self, offset: f64, step: f64, n: u32) -> u32 {
        // offset >= 0 after the bounds check, so the cast truncates toward 0.
        let i = (offset / step) as u32;
        i.min(n - 1)
    }

    /// Every cell whose closed extent intersects the envelope. Errors when
    /// the envelope is disjoint from the space.
    pub fn cells_of_envelope(&self, e: &Envelope) -> Result<Vec<CellId>, GridError> {
        if !self.space().intersects(e) {
            return Err(GridError::OutOfBounds);
        }
        let (x_lo, x_hi) = self.axis_range(e.min.x - self.origin.x, e.max.x - self.origin.x, self.cell_width(), self.nx);
        let (y_lo, y_hi) = self.axis_range(e.min.y - self.origin.y, e.max.y - self.origin.y, self.cell_height(), self.ny);
        let mut out = Vec::with_capacity(((x_hi - x_lo + 1) * (y_hi - y_lo + 1)) as usize);
        for iy in y_lo..=y_hi {
            for ix in x_lo..=x_hi {
                out.push(self.cell_id(ix, iy));
            }
        }
        Ok(out)
    }

    /// Index range of cells whose closed 1-D extent `[i*step, (i+1)*step]`
    /// intersects `[lo, hi]` (both relative to the origin).
    fn axis_range(&self, lo: f64, hi: f64, step: f64, n: u32) -> (u32, u32) {
        let mut i_lo = if lo <= 0.0 { 0 } else { (lo / step) as u32 };
        // A boundary-aligned low edge also touches the cell below it.
        if i_lo > 0 && i_lo as f64 * step == lo {
            i_lo -= 1;
        }
        let i_hi = if hi >= 0.0 { ((hi / step) as u32).min(n - 1) } else { 0 };
        (i_lo.min(n - 1), i_hi)
    }

    /// Every cell whose closed extent intersects the segment. Both endpoints
    /// must lie inside the space.
    pub fn cells_of_segment(&self, s: &Segment) -> Result<Vec<CellId>, GridError> {
        let space = self.space();
        if !space.contains(s.start) || !space.contains(s.end) {
            return Err(GridError::OutOfBounds);
        }
        let bbox = Envelope::new(
            Point::new(s.start.x.min(s.end.x), s.start.y.min(s.end.y)),
            Point::new(s.start.x.max(s.end.x), s.start.y.max(s.end.y)),
        );
        let mut out = Vec::new();
        for c in self.cells_of_envelope(&bbox)? {
            if self.cell_extent(c).intersects_segment(s) {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// Union of `cells_of_segment` over consecutive hops of a path (a single
    /// point degenerates to its owning cell's closed-extent neighbors).
    pub fn cells_of_path(&self, pts: &[Point]) -> Result<Vec<CellId>, GridError> {
        let mut out: Vec<CellId> = Vec::new();
        if pts.len() == 1 {
            out = self.cells_of_segment(&Segment::new(pts[0], pts[0]))?;
        } else {
            for w in pts.windows(2) {
                out.extend(self.cells_of_segment(&Segment::new(w[0], w[1]))?);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Immutable cell-to-shard assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementMap {
    shard_of: Vec<u32>,
    num_shards: u32,
}

impl PlacementMap {
    /// Wraps an explicit assignment; every cell must map below `num_shards`.
    pub fn from_assignments(shard_of: Vec<u32>, num_shards: u32) -> Result<Self, GridError> {
        if num_shards == 0 || shard_of.iter().any(|&s| s >= num_shards) {
            return Err(GridError::InvalidShardCount);
        }
        Ok(PlacementMap { shard_of, num_shards })
    }

    pub fn shard_of(&self, c: CellId) -> u32 {
        self.shard_of[c.0 as usize]
    }

    pub fn num_shards(&self) -> u32 {
        self.num_shards
    }

    pub fn assignments(&self) -> &[u32] {
        &self.shard_of
    }
}

/// Recursively splits the grid into `num_shards` rectangular leaf regions,
/// alternating the split axis and cutting at the weighted median of cell
/// centers, then assigns each cell to its leaf's shard.
///
/// `num_shards` must be a power of two between 1 and the cell count;
/// `cell_weights` carries one non-negative weight per cell (row-major).
pub fn build_placement(
    g: &GridConfig,
    num_shards: u32,
    cell_weights: &[f64],
) -> Result<PlacementMap, GridError> {
    if num_shards == 0 || !num_shards.is_power_of_two() || num_shards > g.cell_count() {
        return Err(GridError::InvalidShardCount);
    }
    if cell_weights.len() != g.cell_count() as usize
        || cell_weights.iter().any(|w| w.is_nan() || *w < 0.0)
    {
        return Err(GridError::InvalidShardCount);
    }
    let mut shard_of = alloc::vec![0u32; g.cell_count() as usize];
    let mut next_shard = 0u32;
    let levels = num_shards.trailing_zeros();
    split_region(
        g,
        cell_weights,
        Region { x0: 0, x1: g.nx(), y0: 0, y1: g.ny() },
        levels,
        0,
        &mut next_shard,
        &mut shard_of,
    )?;
    debug_assert_eq!(next_shard, num_shards);
    PlacementMap::from_assignments(shard_of, num_shards)
}

#[derive(Clone, Copy)]
struct Region {
    x0: u32,
    x1: u32,
    y0: u32,
    y1: u32,
}

impl Region {
    fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    fn height(&self) -> u32 {
        self.y1 - self.y0
    }
}

fn split_region(
    g: &GridConfig,
    weights: &[f64],
    r: Region,
    levels: u32,
    depth: u32,
    next_shard: &mut u32,
    shard_of: &mut [u32],
) -> Result<(), GridError> {
    if levels == 0 {
        let shard = *next_shard;
        *next_shard += 1;
        for iy in r.y0..r.y1 {
            for ix in r.x0..r.x1 {
                shard_of[g.cell_id(ix, iy).0 as usize] = shard;
            }
        }
        return Ok(());
    }
    // Each side must retain enough cells for its remaining leaves.
    let need = 1u64 << (levels - 1);
    let prefer_x = depth.is_multiple_of(2);
    let axes = if prefer_x { [true, false] } else { [false, true] };
    for split_x in axes {
        let (lo, hi, other) = if split_x {
            (r.x0, r.x1, r.height() as u64)
        } else {
            (r.y0, r.y1, r.width() as u64)
        };
        // Smallest/largest admissible cut keeping `need` cells on each side.
        let margin = need.div_ceil(other.max(1)) as u32;
        if (hi - lo) < 2 * margin {
            continue;
        }
        let (cut_min, cut_max) = (lo + margin, hi - margin);
        let cut = if split_x {
            weighted_median_cut(lo, hi, cut_min, cut_max, |ix| column_weight(g, weights, &r, ix))
        } else {
            weighted_median_cut(lo, hi, cut_min, cut_max, |iy| row_weight(g, weights, &r, iy))
        };
        let (left, right) = if split_x {
            (Region { x1: cut, ..r }, Region { x0: cut, ..r })
        } else {
            (Region { y1: cut, ..r }, Region { y0: cut, ..r })
        };
        split_region(g, weights, left, levels - 1, depth + 1, next_shard, shard_of)?;
        split_region(g, weights, right, levels - 1, depth + 1, next_shard, shard_of)?;
        return Ok(());
    }
    // Neither axis can feed both subtrees (e.g. 8 shards on a 3x3 grid).
    Err(GridError::InvalidShardCount)
}

fn column_weight(g: &GridConfig, weights: &[f64], r: &Region, ix: u32) -> f64 {
    (r.y0..r.y1).map(|iy| weights[g.cell_id(ix, iy).0 as usize]).sum()
}

fn row_weight(g: &GridConfig, weights: &[f64], r: &Region, iy: u32) -> f64 {
    (r.x0..r.x1).map(|ix| weights[g.cell_id(ix, iy).0 as usize]).sum()
}

/// Smallest cut index in `[cut_min, cut_max]` such that the weight of
/// `[lo, cut)` reaches half the region total; the clamped midpoint when all
/// weights are zero.
fn weighted_median_cut<W: Fn(u32) -> f64>(
    lo: u32,
    hi: u32,
    cut_min: u32,
    cut_max: u32,
    line_weight: W,
) -> u32 {
    debug_assert!(lo < cut_min && cut_min <= cut_max && cut_max < hi);
    let total: f64 = (lo..hi).map(&line_weight).sum();
    if total <= 0.0 {
        return (lo + (hi - lo) / 2).clamp(cut_min, cut_max);
    }
    let mut cum: f64 = (lo..cut_min).map(&line_weight).sum();
    for cut in cut_min..=cut_max {
        if cum * 2.0 >= total {
            return cut;
        }
        cum += line_weight(cut);
    }
    cut_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid_10x10() -> GridConfig {
        GridConfig::new(Point::new(0.0, 0.0), 10_000.0, 10_000.0, 10, 10).unwrap()
    }

    #[test]
    fn cell_of_floor_arithmetic() {
        let g = grid_10x10();
        assert_eq!(g.cell_of(Point::new(1500.0, 250.0)).unwrap(), CellId(1));
        assert_eq!(g.cell_of(Point::new(0.0, 0.0)).unwrap(), CellId(0));
        assert_eq!(g.cell_of(Point::new(10_000.0, 10_000.0)).unwrap(), CellId(99));
        assert_eq!(g.cell_of(Point::new(-0.1, 0.0)), Err(GridError::OutOfBounds));
    }

    #[test]
    fn cells_partition_the_space() {
        let g = grid_10x10();
        // Interior boundary point belongs to exactly one cell (half-open).
        assert_eq!(g.cell_of(Point::new(1000.0, 0.0)).unwrap(), CellId(1));
        assert_eq!(g.cell_of(Point::new(999.999, 0.0)).unwrap(), CellId(0));
    }

    #[test]
    fn envelope_coverage() {
        let g = grid_10x10();
        // Strictly interior to one cell.
        let e = Envelope::new(Point::new(100.0, 100.0), Point::new(900.0, 900.0));
        assert_eq!(g.cells_of_envelope(&e).unwrap(), vec![CellId(0)]);
        // A full cell extent also touches its closed-boundary neighbors.
        let e = g.cell_extent(CellId(11));
        let cells = g.cells_of_envelope(&e).unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.contains(&CellId(11)));
        // Whole space.
        let all = g.cells_of_envelope(&g.space()).unwrap();
        assert_eq!(all.len(), 100);
        // Disjoint.
        let out = Envelope::new(Point::new(20_000.0, 0.0), Point::new(21_000.0, 100.0));
        assert_eq!(g.cells_of_envelope(&out), Err(GridError::OutOfBounds));
    }

    #[test]
    fn segment_coverage() {
        let g = grid_10x10();
        let s = Segment::new(Point::new(500.0, 500.0), Point::new(2500.0, 500.0));
        assert_eq!(
            g.cells_of_segment(&s).unwrap(),
            vec![CellId(0), CellId(1), CellId(2)]
        );
        let z = Segment::new(Point::new(42.0, 42.0), Point::new(42.0, 42.0));
        assert_eq!(g.cells_of_segment(&z).unwrap(), vec![CellId(0)]);
    }

    #[test]
    fn segment_coverage_contains_endpoint_cells() {
        let g = grid_10x10();
        let s = Segment::new(Point::new(950.0, 950.0), Point::new(1050.0, 1080.0));
        let cells = g.cells_of_segment(&s).unwrap();
        assert!(cells.contains(&g.cell_of(s.start).unwrap()));
        assert!(cells.contains(&g.cell_of(s.end).unwrap()));
    }

    #[test]
    fn placement_single_shard() {
        let g = grid_10x10();
        let pm = build_placement(&g, 1, &vec![1.0; 100]).unwrap();
        assert!((0..100).all(|i| pm.shard_of(CellId(i)) == 0));
    }

    #[test]
    fn placement_uniform_two_shards_splits_columns() {
        let g = grid_10x10();
        let pm = build_placement(&g, 2, &vec![1.0; 100]).unwrap();
        for iy in 0..10 {
            for ix in 0..10 {
                let want = if ix < 5 { 0 } else { 1 };
                assert_eq!(pm.shard_of(g.cell_id(ix, iy)), want, "cell ({ix},{iy})");
            }
        }
    }

    #[test]
    fn placement_rejects_bad_shard_counts() {
        let g = grid_10x10();
        assert_eq!(build_placement(&g, 0, &vec![1.0; 100]), Err(GridError::InvalidShardCount));
        assert_eq!(build_placement(&g, 3, &vec![1.0; 100]), Err(GridError::InvalidShardCount));
        assert_eq!(build_placement(&g, 128, &vec![1.0; 100]), Err(GridError::InvalidShardCount));
        assert_eq!(build_placement(&g, 2, &vec![1.0; 99]), Err(GridError::InvalidShardCount));
    }

    #[test]
    fn placement_assigns_every_cell_to_rectangles() {
        let g = grid_10x10();
        let mut weights = vec![0.0; 100];
        weights[34] = 10.0; // all weight in one cell
        let pm = build_placement(&g, 4, &weights).unwrap();
        // Every shard's cell set forms a rectangle of indices.
        for shard in 0..4 {
            let mut min_x = u32::MAX;
            let mut max_x = 0;
            let mut min_y = u32::MAX;
            let mut max_y = 0;
            let mut count = 0;
            for iy in 0..10 {
                for ix in 0..10 {
                    if pm.shard_of(g.cell_id(ix, iy)) == shard {
                        min_x = min_x.min(ix);
                        max_x = max_x.max(ix);
                        min_y = min_y.min(iy);
                        max_y = max_y.max(iy);
                        count += 1;
                    }
                }
            }
            assert!(count > 0, "shard {shard} is empty");
            assert_eq!(count, (max_x - min_x + 1) * (max_y - min_y + 1), "shard {shard} not a rectangle");
        }
    }
}
