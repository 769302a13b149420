//! Planar geometry: points, segments, envelopes, convex fences, and the
//! segment-vs-region predicates used for reactive sensing.
//!
//! Coordinates are meters in a projected plane, stored as `f64`. Predicate
//! decisions are made with plain floating-point comparisons and no epsilon:
//! inputs at the scale of the workloads (meters, centimeter resolution) make
//! the comparisons deterministic, which the trace checkers rely on.

use alloc::vec::Vec;
use core::fmt;

/// Nanosecond reading of the platform's monotone clock.
pub type Nanos = u64;

/// A location in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cross product of (b - a) x (c - a); positive when `c` lies to the left of
/// the directed line a -> b.
#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// One hop of a movement. Zero-length segments are allowed and represent a
/// standing location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

impl Segment {
    pub const fn new(start: Point, end: Point) -> Self {
        Segment { start, end }
    }

    pub fn is_degenerate(&self) -> bool {
        self.start == self.end
    }
}

/// Axis-aligned rectangle, closed on all four sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub min: Point,
    pub max: Point,
}

impl Envelope {
    /// Builds an envelope; callers must supply `min <= max` per axis.
    pub fn new(min: Point, max: Point) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y);
        Envelope { min, max }
    }

    pub fn of_point(p: Point) -> Self {
        Envelope { min: p, max: p }
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    /// Closed membership on all four sides.
    pub fn contains(&self, p: Point) -> bool {
        self.min.x <= p.x && p.x <= self.max.x && self.min.y <= p.y && p.y <= self.max.y
    }

    /// Closed intersection test (touching boundaries count).
    pub fn intersects(&self, other: &Envelope) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// Intersection rectangle, or `None` when disjoint.
    pub fn intersection(&self, other: &Envelope) -> Option<Envelope> {
        if !self.intersects(other) {
            return None;
        }
        Some(Envelope {
            min: Point::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y)),
            max: Point::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y)),
        })
    }

    /// Smallest envelope covering both.
    pub fn union(&self, other: &Envelope) -> Envelope {
        Envelope {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn expand_to(&mut self, p: Point) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    /// Closed test for a segment touching this rectangle anywhere.
    pub fn intersects_segment(&self, s: &Segment) -> bool {
        // Liang-Barsky style slab clipping of the parameter interval [0, 1].
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let dx = s.end.x - s.start.x;
        let dy = s.end.y - s.start.y;
        for (d, lo, hi, a) in [
            (dx, self.min.x, self.max.x, s.start.x),
            (dy, self.min.y, self.max.y, s.start.y),
        ] {
            if d == 0.0 {
                if a < lo || a > hi {
                    return false;
                }
            } else {
                let ta = (lo - a) / d;
                let tb = (hi - a) / d;
                let (lo_t, hi_t) = if ta <= tb { (ta, tb) } else { (tb, ta) };
                t0 = t0.max(lo_t);
                t1 = t1.min(hi_t);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Spatial predicate of a movement against a fence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// The movement has a point strictly inside and a point strictly outside
    /// the fence: it enters or leaves. Grazing the boundary alone does not
    /// cross.
    Cross,
    /// Every point of the movement lies inside or on the fence.
    Cover,
    /// The movement touches the fence anywhere; boundary contact counts.
    Overlap,
}

impl Predicate {
    pub fn name(&self) -> &'static str {
        match self {
            Predicate::Cross => "cross",
            Predicate::Cover => "cover",
            Predicate::Overlap => "overlap",
        }
    }

    pub fn parse(s: &str) -> Option<Predicate> {
        match s {
            "cross" => Some(Predicate::Cross),
            "cover" => Some(Predicate::Cover),
            "overlap" => Some(Predicate::Overlap),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeomError {
    /// Fewer than three distinct points, or all points collinear.
    DegenerateInput,
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::DegenerateInput => f.write_str("degenerate input: need >= 3 non-collinear points"),
        }
    }
}

impl core::error::Error for GeomError {}

/// A strictly convex polygon with counter-clockwise vertices and no three
/// collinear vertices retained. Used for sensing fences.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates and wraps an explicit vertex list: at least three vertices,
    /// counter-clockwise, strictly convex.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::DegenerateInput);
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if orient(a, b, c) <= 0.0 {
                return Err(GeomError::DegenerateInput);
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    /// Axis-aligned square fence of side `side` centered at `center`.
    pub fn axis_aligned_square(center: Point, side: f64) -> Self {
        let h = side / 2.0;
        ConvexPolygon {
            vertices: alloc::vec![
                Point::new(center.x - h, center.y - h),
                Point::new(center.x + h, center.y - h),
                Point::new(center.x + h, center.y + h),
                Point::new(center.x - h, center.y + h),
            ],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Closed membership: boundary points count as contained.
    pub fn contains(&self, p: Point) -> bool {
        self.edges().all(|(a, b)| orient(a, b, p) >= 0.0)
    }

    /// Strict membership: boundary points are excluded.
    pub fn contains_strictly(&self, p: Point) -> bool {
        self.edges().all(|(a, b)| orient(a, b, p) > 0.0)
    }

    pub fn bounding_box(&self) -> Envelope {
        let mut env = Envelope::of_point(self.vertices[0]);
        for &v in &self.vertices[1..] {
            env.expand_to(v);
        }
        env
    }

    pub fn translate(&self, dx: f64, dy: f64) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| v.offset(dx, dy)).collect(),
        }
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Clips the segment's parameter interval [0, 1] against the closed
    /// region. Returns the surviving interval, or `None` when the segment
    /// misses the region entirely.
    fn clip_segment(&self, s: &Segment) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for (a, b) in self.edges() {
            let c_start = orient(a, b, s.start);
            let c_end = orient(a, b, s.end);
            if c_start < 0.0 && c_end < 0.0 {
                return None;
            }
            if c_start >= 0.0 && c_end >= 0.0 {
                continue;
            }
            // One side is negative: the constraint line is crossed once.
            let t = c_start / (c_start - c_end);
            if c_start < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    /// True when the segment contains at least one point strictly inside the
    /// region. A sub-segment lying on an edge line contributes no interior
    /// point.
    fn segment_has_interior_point(&self, s: &Segment) -> bool {
        let Some((t0, t1)) = self.clip_segment(s) else {
            return false;
        };
        if s.is_degenerate() {
            return self.contains_strictly(s.start);
        }
        // If the segment is collinear with any edge, the surviving part runs
        // along the boundary.
        for (a, b) in self.edges() {
            if orient(a, b, s.start) == 0.0 && orient(a, b, s.end) == 0.0 {
                return false;
            }
        }
        t0 < t1
    }

    /// Closed intersection test: boundary contact counts.
    pub fn intersects_segment(&self, s: &Segment) -> bool {
        self.clip_segment(s).is_some()
    }
}

/// Evaluates a predicate for a single movement hop against a fence.
///
/// `Cross` and `Cover` are mutually exclusive; `Cross` implies `Overlap`.
pub fn eval_predicate(p: Predicate, seg: &Segment, fence: &ConvexPolygon) -> bool {
    match p {
        Predicate::Cross => {
            let covered = fence.contains(seg.start) && fence.contains(seg.end);
            !covered && fence.segment_has_interior_point(seg)
        }
        Predicate::Cover => fence.contains(seg.start) && fence.contains(seg.end),
        Predicate::Overlap => fence.intersects_segment(seg),
    }
}

/// Evaluates a predicate for a whole polyline (an itinerary's point list)
/// against a fence.
///
/// Definitions mirror the single-hop case applied to the polyline as a set of
/// points: `Cross` needs a strictly-interior point and a strictly-exterior
/// point anywhere on the path; `Cover` needs the whole path inside the closed
/// region; `Overlap` needs any contact. A single-point path can cover or
/// overlap but never cross.
pub fn eval_predicate_path(p: Predicate, path: &[Point], fence: &ConvexPolygon) -> bool {
    if path.is_empty() {
        return false;
    }
    // Convexity lets containment be decided on vertices alone.
    let covered = path.iter().all(|&v| fence.contains(v));
    match p {
        Predicate::Cover => covered,
        Predicate::Overlap => {
            if path.len() == 1 {
                return fence.contains(path[0]);
            }
            path.windows(2)
                .any(|w| fence.intersects_segment(&Segment::new(w[0], w[1])))
        }
        Predicate::Cross => {
            if covered {
                return false;
            }
            if path.len() == 1 {
                return false;
            }
            path.windows(2)
                .any(|w| fence.segment_has_interior_point(&Segment::new(w[0], w[1])))
        }
    }
}

/// An ordered, timestamped sequence of locations. Timestamps are strictly
/// increasing monotone-clock readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Itinerary {
    points: Vec<Point>,
    stamps: Vec<Nanos>,
}

impl Itinerary {
    pub fn new(points: Vec<Point>, stamps: Vec<Nanos>) -> Option<Self> {
        if points.is_empty() || points.len() != stamps.len() {
            return None;
        }
        if stamps.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        Some(Itinerary { points, stamps })
    }

    pub fn single(p: Point, t: Nanos) -> Self {
        Itinerary { points: alloc::vec![p], stamps: alloc::vec![t] }
    }

    /// Appends a later location; returns false (and leaves the itinerary
    /// unchanged) if the timestamp does not advance the clock.
    pub fn push(&mut self, p: Point, t: Nanos) -> bool {
        if t <= *self.stamps.last().expect("itinerary is never empty") {
            return false;
        }
        self.points.push(p);
        self.stamps.push(t);
        true
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn stamps(&self) -> &[Nanos] {
        &self.stamps
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        *self.points.last().expect("itinerary is never empty")
    }

    pub fn last_stamp(&self) -> Nanos {
        *self.stamps.last().expect("itinerary is never empty")
    }

    /// Consecutive hops; empty for a single-point itinerary.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment::new(w[0], w[1]))
    }
}

/// Smallest convex polygon containing all input points.
///
/// Collinear boundary points are dropped; the result is strictly convex and
/// counter-clockwise. Fails when fewer than three distinct points remain or
/// all points are collinear.
pub fn convex_hull(points: &[Point]) -> Result<ConvexPolygon, GeomError> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .expect("finite coordinates")
            .then(a.y.partial_cmp(&b.y).expect("finite coordinates"))
    });
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeomError::DegenerateInput);
    }

    // Monotone chain with strict turns, so collinear points are dropped.
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeomError::DegenerateInput);
    }
    Ok(ConvexPolygon { vertices: lower })
}

/// Convex hull of the fences held at every recorded location of an itinerary:
/// the accumulated fence of a sensing actor over one snapshot epoch.
pub fn accumulated_fence<F>(iti: &Itinerary, fence_at: F) -> Result<ConvexPolygon, GeomError>
where
    F: Fn(Point) -> ConvexPolygon,
{
    let mut corners: Vec<Point> = Vec::new();
    for &p in iti.points() {
        corners.extend_from_slice(fence_at(p).vertices());
    }
    convex_hull(&corners)
}
