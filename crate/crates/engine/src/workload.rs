//! Deterministic movement-model generators: uniform, Gaussian hotspot, and
//! road network. Each actor owns an independent RNG stream derived from the
//! run seed and its index, so identical configurations replay bit-identical
//! trajectories regardless of scheduling.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use roam_core::grid::GridConfig;
use roam_core::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Uniform,
    Gaussian,
    RoadNet,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Uniform => "uniform",
            Model::Gaussian => "gaussian",
            Model::RoadNet => "roadnet",
        }
    }

    pub fn parse(s: &str) -> Option<Model> {
        match s {
            "uniform" => Some(Model::Uniform),
            "gaussian" => Some(Model::Gaussian),
            "roadnet" => Some(Model::RoadNet),
            _ => None,
        }
    }
}

fn actor_rng(seed: u64, actor: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ actor.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (stream << 56))
}

/// Free movement with a persistent heading: on hitting the border the actor
/// bounces straight back, traveling the excess distance; when even the
/// bounce-back would exit (corners), it stays put for this step and draws a
/// fresh heading.
pub struct FreeState {
    pub pos: Point,
    heading: f64,
    speed: f64,
    rng: ChaCha8Rng,
}

impl FreeState {
    pub fn init_uniform(grid: &GridConfig, max_speed: f64, seed: u64, actor: u64) -> Self {
        let mut rng = actor_rng(seed, actor, 1);
        let space = grid.space();
        let pos = Point::new(
            rng.gen_range(space.min.x..space.max.x),
            rng.gen_range(space.min.y..space.max.y),
        );
        let heading = rng.gen_range(0.0..TAU);
        let speed = rng.gen_range(0.0..max_speed).max(f64::MIN_POSITIVE);
        FreeState { pos, heading, speed, rng }
    }

    pub fn init_gaussian(
        grid: &GridConfig,
        hotspots: &[Point],
        sigma: f64,
        seed: u64,
        actor: u64,
    ) -> Self {
        let mut rng = actor_rng(seed, actor, 1);
        let space = grid.space();
        let normal = Normal::new(0.0, sigma).expect("sigma > 0");
        let h = hotspots[rng.gen_range(0..hotspots.len())];
        let pos = Point::new(
            (h.x + normal.sample(&mut rng)).clamp(space.min.x, space.max.x),
            (h.y + normal.sample(&mut rng)).clamp(space.min.y, space.max.y),
        );
        let heading = rng.gen_range(0.0..TAU);
        FreeState { pos, heading, speed: 1.0, rng }
    }

    fn advance(&mut self, grid: &GridConfig, dist: f64) -> Point {
        if dist <= 0.0 {
            return self.pos;
        }
        let space = grid.space();
        let dir = (self.heading.cos(), self.heading.sin());
        let naive = Point::new(self.pos.x + dist * dir.0, self.pos.y + dist * dir.1);
        if space.contains(naive) {
            self.pos = naive;
            return self.pos;
        }
        // First border crossing along the ray.
        let mut t_hit = f64::INFINITY;
        if dir.0 > 0.0 {
            t_hit = t_hit.min((space.max.x - self.pos.x) / (dist * dir.0));
        } else if dir.0 < 0.0 {
            t_hit = t_hit.min((space.min.x - self.pos.x) / (dist * dir.0));
        }
        if dir.1 > 0.0 {
            t_hit = t_hit.min((space.max.y - self.pos.y) / (dist * dir.1));
        } else if dir.1 < 0.0 {
            t_hit = t_hit.min((space.min.y - self.pos.y) / (dist * dir.1));
        }
        let t_hit = t_hit.clamp(0.0, 1.0);
        let hit = Point::new(self.pos.x + t_hit * dist * dir.0, self.pos.y + t_hit * dist * dir.1);
        let excess = dist * (1.0 - t_hit);
        // Bounce straight back along the incoming direction.
        let reflected = Point::new(hit.x - excess * dir.0, hit.y - excess * dir.1);
        if space.contains(reflected) {
            self.pos = reflected;
            self.heading = (self.heading + TAU / 2.0) % TAU;
        } else {
            // Cornered: stay put this step and pick a new direction so the
            // actor does not freeze forever.
            self.heading = self.rng.gen_range(0.0..TAU);
        }
        self.pos
    }

    /// Uniform model: constant per-actor speed along the heading.
    pub fn step_uniform(&mut self, grid: &GridConfig, dt: f64) -> Point {
        let dist = self.speed * dt;
        self.advance(grid, dist)
    }

    /// Gaussian model: speed scales with the distance to the nearest hotspot,
    /// `max_speed * min(1, d / (3 sigma))`.
    pub fn step_gaussian(
        &mut self,
        grid: &GridConfig,
        dt: f64,
        hotspots: &[Point],
        sigma: f64,
        max_speed: f64,
    ) -> Point {
        let speed = max_speed * gaussian_speed_factor(self.pos, hotspots, sigma);
        self.advance(grid, speed * dt)
    }

    /// As [`step_gaussian`](Self::step_gaussian) but with the bucketed
    /// nearest-hotspot lookup.
    pub fn step_gaussian_field(
        &mut self,
        grid: &GridConfig,
        dt: f64,
        field: &HotspotField,
        max_speed: f64,
    ) -> Point {
        let speed = max_speed * field.speed_factor(self.pos);
        self.advance(grid, speed * dt)
    }
}

pub fn gaussian_speed_factor(pos: Point, hotspots: &[Point], sigma: f64) -> f64 {
    let d2_min = hotspots
        .iter()
        .map(|h| (h.x - pos.x).powi(2) + (h.y - pos.y).powi(2))
        .fold(f64::INFINITY, f64::min);
    let d = d2_min.sqrt();
    (d / (3.0 * sigma)).min(1.0)
}

/// Bucketed nearest-hotspot lookup. The speed factor saturates at distance
/// `3 sigma`, so only hotspots within one bucket ring (bucket side `3 sigma`)
/// can matter; anything farther maps to the cap.
pub struct HotspotField {
    buckets: HashMap<(i64, i64), Vec<Point>>,
    cell: f64,
    sigma: f64,
}

impl HotspotField {
    pub fn new(hotspots: &[Point], sigma: f64) -> Self {
        let cell = 3.0 * sigma;
        let mut buckets: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
        for h in hotspots {
            let key = ((h.x / cell).floor() as i64, (h.y / cell).floor() as i64);
            buckets.entry(key).or_default().push(*h);
        }
        HotspotField { buckets, cell, sigma }
    }

    pub fn speed_factor(&self, pos: Point) -> f64 {
        let bx = (pos.x / self.cell).floor() as i64;
        let by = (pos.y / self.cell).floor() as i64;
        let mut d2_min = f64::INFINITY;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.buckets.get(&(bx + dx, by + dy)) {
                    for h in list {
                        let d2 = (h.x - pos.x).powi(2) + (h.y - pos.y).powi(2);
                        d2_min = d2_min.min(d2);
                    }
                }
            }
        }
        if d2_min == f64::INFINITY {
            return 1.0;
        }
        (d2_min.sqrt() / (3.0 * self.sigma)).min(1.0)
    }
}

pub fn make_hotspots(grid: &GridConfig, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4057);
    let space = grid.space();
    (0..count)
        .map(|_| {
            Point::new(
                rng.gen_range(space.min.x..space.max.x),
                rng.gen_range(space.min.y..space.max.y),
            )
        })
        .collect()
}

/// Default hotspot spread: space side over four root-hotspot-count.
pub fn default_sigma(grid: &GridConfig, hotspots: usize) -> f64 {
    let side = grid.space().area().sqrt();
    side / (4.0 * (hotspots.max(1) as f64).sqrt())
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

/// Undirected road graph; coordinates live inside the configured space.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    nodes: Vec<Point>,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>, // node -> incident edge indexes
}

impl RoadGraph {
    pub fn from_parts(nodes: Vec<Point>, edges: Vec<(u32, u32)>) -> Result<Self, GraphError> {
        let invalid = |reason: String| GraphError::Invalid { line: 0, reason };
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut seen = HashMap::new();
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a as usize >= nodes.len() || b as usize >= nodes.len() {
                return Err(invalid(format!("edge ({a}, {b}) references an unknown node")));
            }
            if nodes[a as usize] == nodes[b as usize] {
                return Err(invalid(format!("edge ({a}, {b}) has zero length")));
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key, ()).is_some() {
                return Err(invalid(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a as usize].push(i as u32);
            adjacency[b as usize].push(i as u32);
        }
        Ok(RoadGraph { nodes, edges, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: u32) -> Point {
        self.nodes[id as usize]
    }

    pub fn edge(&self, idx: u32) -> (u32, u32) {
        self.edges[idx as usize]
    }

    pub fn edge_len(&self, idx: u32) -> f64 {
        let (a, b) = self.edges[idx as usize];
        let (pa, pb) = (self.node(a), self.node(b));
        ((pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2)).sqrt()
    }

    pub fn incident(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }
}

/// Line-oriented road graph format: `# space <w> <h>` header (optional),
/// `N <id> <x> <y>` nodes, `E <id1> <id2>` edges, `#` comments. When a header
/// is present the coordinates are scaled from the declared extent into the
/// configured space.
pub fn parse_road_graph(text: &str, grid: &GridConfig) -> Result<RoadGraph, GraphError> {
    let mut declared: Option<(f64, f64)> = None;
    let mut raw_nodes: HashMap<u64, Point> = HashMap::new();
    let mut raw_edges: Vec<(u64, u64, usize)> = Vec::new();
    let mut order: Vec<u64> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        let err = |reason: String| GraphError::Invalid { line: lineno, reason };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut tok = rest.split_whitespace();
            if tok.next() == Some("space") {
                let w: f64 = tok
                    .next()
                    .ok_or_else(|| err("missing space width".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad width: {e}")))?;
                let h: f64 = tok
                    .next()
                    .ok_or_else(|| err("missing space height".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad height: {e}")))?;
                if w <= 0.0 || h <= 0.0 {
                    return Err(err("space extents must be positive".into()));
                }
                declared = Some((w, h));
            }
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("N") => {
                let id: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing node id".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad node id: {e}")))?;
                let x: f64 = tok
                    .next()
                    .ok_or_else(|| err("missing x".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad x: {e}")))?;
                let y: f64 = tok
                    .next()
                    .ok_or_else(|| err("missing y".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad y: {e}")))?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(err("non-finite coordinate".into()));
                }
                if raw_nodes.insert(id, Point::new(x, y)).is_some() {
                    return Err(err(format!("duplicate node id {id}")));
                }
                order.push(id);
            }
            Some("E") => {
                let a: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing edge endpoint".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad edge id: {e}")))?;
                let b: u64 = tok
                    .next()
                    .ok_or_else(|| err("missing edge endpoint".into()))?
                    .parse()
                    .map_err(|e| err(format!("bad edge id: {e}")))?;
                raw_edges.push((a, b, lineno));
            }
            Some(other) => return Err(err(format!("unknown record type {other}"))),
            None => {}
        }
    }
    // Scale into the configured space if a header declared a native extent.
    let space = grid.space();
    let (sx, sy, ox, oy) = match declared {
        Some((w, h)) => (
            (space.max.x - space.min.x) / w,
            (space.max.y - space.min.y) / h,
            space.min.x,
            space.min.y,
        ),
        None => (1.0, 1.0, 0.0, 0.0),
    };
    let mut compact: HashMap<u64, u32> = HashMap::new();
    let mut nodes = Vec::with_capacity(order.len());
    for id in &order {
        let p = raw_nodes[id];
        let scaled = Point::new(ox + p.x * sx, oy + p.y * sy);
        if !space.contains(scaled) {
            return Err(GraphError::Invalid {
                line: 0,
                reason: format!("node {id} at {scaled} lies outside the space"),
            });
        }
        compact.insert(*id, nodes.len() as u32);
        nodes.push(scaled);
    }
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (a, b, lineno) in raw_edges {
        let ca = *compact
            .get(&a)
            .ok_or_else(|| GraphError::Invalid { line: lineno, reason: format!("edge references unknown node {a}") })?;
        let cb = *compact
            .get(&b)
            .ok_or_else(|| GraphError::Invalid { line: lineno, reason: format!("edge references unknown node {b}") })?;
        edges.push((ca, cb));
    }
    RoadGraph::from_parts(nodes, edges)
}

pub fn load_road_graph(path: &Path, grid: &GridConfig) -> Result<RoadGraph, GraphError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GraphError::Invalid { line: 0, reason: format!("cannot read {}: {e}", path.display()) })?;
    parse_road_graph(&text, grid)
}

/// Generates a rows x cols lattice road graph spanning the given extent, in
/// the file format above (including the header).
pub fn lattice_road_graph_text(rows: u32, cols: u32, width: f64, height: f64) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "# space {width} {height}");
    let dx = width / cols as f64;
    let dy = height / rows as f64;
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            let x = (c as f64 + 0.5) * dx;
            let y = (r as f64 + 0.5) * dy;
            let _ = writeln!(out, "N {id} {x} {y}");
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                let _ = writeln!(out, "E {id} {}", id + 1);
            }
            if r + 1 < rows {
                let _ = writeln!(out, "E {id} {}", id + cols);
            }
        }
    }
    out
}

/// Position of an actor constrained to the road graph: an edge, a direction
/// along it, and an offset from the origin node.
pub struct RoadState {
    edge: u32,
    /// Node the actor is moving away from.
    from_node: u32,
    offset: f64,
    rng: ChaCha8Rng,
    pub pos: Point,
}

impl RoadState {
    pub fn init(graph: &RoadGraph, seed: u64, actor: u64) -> Self {
        let mut rng = actor_rng(seed, actor, 2);
        let edge = rng.gen_range(0..graph.num_edges()) as u32;
        let (a, b) = graph.edge(edge);
        let from_node = if rng.gen_bool(0.5) { a } else { b };
        let offset = rng.gen_range(0.0..graph.edge_len(edge));
        let mut st = RoadState { edge, from_node, offset, rng, pos: Point::new(0.0, 0.0) };
        st.pos = st.position(graph);
        st
    }

    fn other_end(&self, graph: &RoadGraph) -> u32 {
        let (a, b) = graph.edge(self.edge);
        if self.from_node == a {
            b
        } else {
            a
        }
    }

    fn position(&self, graph: &RoadGraph) -> Point {
        let from = graph.node(self.from_node);
        let to = graph.node(self.other_end(graph));
        let len = graph.edge_len(self.edge);
        let t = (self.offset / len).clamp(0.0, 1.0);
        Point::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y))
    }

    /// Advances `speed * dt` along the roads. At a junction the next edge is
    /// drawn uniformly among the other incident edges; dead ends reverse.
    pub fn step(&mut self, graph: &RoadGraph, speed: f64, dt: f64) -> Point {
        let mut remaining = speed * dt;
        let mut guard = 0;
        while remaining > 0.0 && guard < 10_000 {
            guard += 1;
            let len = graph.edge_len(self.edge);
            let left = len - self.offset;
            if remaining < left {
                self.offset += remaining;
                remaining = 0.0;
            } else {
                remaining -= left;
                let node = self.other_end(graph);
                let incident = graph.incident(node);
                let next = if incident.len() == 1 {
                    incident[0] // dead end: reverse along the same edge
                } else {
                    let choices: Vec<u32> =
                        incident.iter().copied().filter(|e| *e != self.edge).collect();
                    choices[self.rng.gen_range(0..choices.len())]
                };
                self.edge = next;
                self.from_node = node;
                self.offset = 0.0;
            }
        }
        self.pos = self.position(graph);
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridConfig {
        GridConfig::new(Point::new(0.0, 0.0), 10_000.0, 10_000.0, 10, 10).unwrap()
    }

    #[test]
    fn uniform_step_advances_along_heading() {
        let g = grid();
        let mut st = FreeState {
            pos: Point::new(5_000.0, 5_000.0),
            heading: 0.0,
            speed: 10.0,
            rng: ChaCha8Rng::seed_from_u64(1),
        };
        let p = st.step_uniform(&g, 1.0);
        assert!((p.x - 5_010.0).abs() < 1e-9);
        assert!((p.y - 5_000.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_travels_excess_and_flips_heading() {
        let g = grid();
        let mut st = FreeState {
            pos: Point::new(9_997.0, 5_000.0),
            heading: 0.0,
            speed: 10.0,
            rng: ChaCha8Rng::seed_from_u64(1),
        };
        let p = st.step_uniform(&g, 1.0);
        assert!((p.x - 9_993.0).abs() < 1e-9, "got {}", p.x);
        assert!((st.heading - TAU / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cornered_actor_stays_put() {
        let g = grid();
        // Half a meter from the corner, heading diagonally out: the
        // bounce-back path exits through the opposite borders.
        let mut st = FreeState {
            pos: Point::new(9_999.5, 9_999.5),
            heading: TAU / 8.0,
            speed: 20_000.0,
            rng: ChaCha8Rng::seed_from_u64(1),
        };
        let before = st.pos;
        let p = st.step_uniform(&g, 1.0);
        assert_eq!(p, before);
    }

    #[test]
    fn gaussian_speed_is_monotone_in_hotspot_distance() {
        let hotspots = [Point::new(0.0, 0.0)];
        let sigma = 500.0;
        assert_eq!(gaussian_speed_factor(Point::new(0.0, 0.0), &hotspots, sigma), 0.0);
        assert_eq!(gaussian_speed_factor(Point::new(1_500.0, 0.0), &hotspots, sigma), 1.0);
        assert_eq!(gaussian_speed_factor(Point::new(9_000.0, 0.0), &hotspots, sigma), 1.0);
        let mut last = -1.0;
        for k in 0..100 {
            let d = 20.0 * k as f64;
            let f = gaussian_speed_factor(Point::new(d, 0.0), &hotspots, sigma);
            assert!(f >= last, "speed factor decreased at d={d}");
            last = f;
        }
    }

    #[test]
    fn road_graph_parses_and_validates() {
        let g = grid();
        let good = "# comment\nN 0 100 100\nN 1 200 100\nE 0 1\n";
        let graph = parse_road_graph(good, &g).unwrap();
        assert_eq!(graph.num_nodes(), 2);
        assert_eq!(graph.num_edges(), 1);
        assert_eq!(graph.incident(0), &[0]);
        assert_eq!(graph.incident(1), &[0]);

        let dangling = "N 0 100 100\nE 0 7\n";
        assert!(matches!(parse_road_graph(dangling, &g), Err(GraphError::Invalid { line: 2, .. })));

        let zero_len = "N 0 100 100\nN 1 100 100\nE 0 1\n";
        assert!(parse_road_graph(zero_len, &g).is_err());

        let dup_edge = "N 0 100 100\nN 1 200 100\nE 0 1\nE 1 0\n";
        assert!(parse_road_graph(dup_edge, &g).is_err());
    }

    #[test]
    fn header_scales_into_the_space() {
        let g = grid();
        let text = "# space 100 100\nN 0 50 50\nN 1 100 100\nE 0 1\n";
        let graph = parse_road_graph(text, &g).unwrap();
        assert_eq!(graph.node(0), Point::new(5_000.0, 5_000.0));
        assert_eq!(graph.node(1), Point::new(10_000.0, 10_000.0));
    }

    #[test]
    fn lattice_has_expected_counts() {
        let g = grid();
        let text = lattice_road_graph_text(20, 20, 10_000.0, 10_000.0);
        let graph = parse_road_graph(&text, &g).unwrap();
        assert_eq!(graph.num_nodes(), 400);
        assert_eq!(graph.num_edges(), 2 * 20 * 19);
    }

    #[test]
    fn road_positions_stay_on_edges() {
        let g = grid();
        let text = lattice_road_graph_text(4, 4, 10_000.0, 10_000.0);
        let graph = parse_road_graph(&text, &g).unwrap();
        let mut st = RoadState::init(&graph, 7, 3);
        for _ in 0..10_000 {
            let p = st.step(&graph, 22.0, 0.5);
            let onroad = (0..graph.num_edges() as u32).any(|e| {
                let (a, b) = graph.edge(e);
                dist_point_segment(p, graph.node(a), graph.node(b)) <= 1e-6
            });
            assert!(onroad, "{p} left the road network");
        }
    }

    #[test]
    fn dead_end_reverses() {
        let g = grid();
        let text = "N 0 100 100\nN 1 200 100\nE 0 1\n";
        let graph = parse_road_graph(text, &g).unwrap();
        let mut st = RoadState {
            edge: 0,
            from_node: 0,
            offset: 90.0,
            rng: ChaCha8Rng::seed_from_u64(1),
            pos: Point::new(0.0, 0.0),
        };
        // 20 m hop: 10 to the node, then 10 back along the same edge.
        let p = st.step(&graph, 20.0, 1.0);
        assert!((p.x - 190.0).abs() < 1e-9);
        assert_eq!(st.from_node, 1);
    }

    fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
        let cx = a.x + t * dx - p.x;
        let cy = a.y + t * dy - p.y;
        (cx * cx + cy * cy).sqrt()
    }

    #[test]
    fn trajectories_are_deterministic() {
        let g = grid();
        let run = || {
            let mut st = FreeState::init_uniform(&g, 22.0, 42, 5);
            (0..200).map(|_| st.step_uniform(&g, 0.5)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn generated_points_stay_inside_the_space() {
        let g = grid();
        let hotspots = make_hotspots(&g, 4, 9);
        let sigma = default_sigma(&g, 4);
        for actor in 0..20u64 {
            let mut u = FreeState::init_uniform(&g, 22.0, 3, actor);
            let mut gs = FreeState::init_gaussian(&g, &hotspots, sigma, 3, actor);
            for _ in 0..500 {
                assert!(g.space().contains(u.step_uniform(&g, 0.5)));
                assert!(g.space().contains(gs.step_gaussian(&g, 0.5, &hotspots, sigma, 22.0)));
            }
        }
    }
}

#[cfg(test)]
mod field_tests {
    use super::*;

    #[test]
    fn bucketed_speed_factor_matches_full_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for sigma in [50.0, 200.0, 900.0] {
            let hotspots: Vec<Point> = (0..300)
                .map(|_| Point::new(rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0)))
                .collect();
            let field = HotspotField::new(&hotspots, sigma);
            for _ in 0..500 {
                let p = Point::new(rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0));
                let slow = gaussian_speed_factor(p, &hotspots, sigma);
                let fast = field.speed_factor(p);
                assert_eq!(slow, fast, "sigma {sigma} at {p}");
            }
        }
    }
}
