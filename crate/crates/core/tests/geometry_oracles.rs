//! Randomized checks of the geometry operations against independent oracles:
//! an O(n^3) half-plane hull, a dense-sampling predicate classifier, and
//! brute-force scans for the grid coverage functions.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roam_core::{
    accumulated_fence, build_placement, convex_hull, eval_predicate, ConvexPolygon, Envelope,
    GridConfig, Itinerary, Point, Predicate, RTree, Segment,
};

fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// O(n^3) hull oracle: a directed pair (i, j) is a hull edge iff every other
/// point lies strictly left of it or on the segment between them. Edges are
/// chained into the counter-clockwise vertex cycle.
fn brute_force_hull(pts: &[Point]) -> Option<Vec<Point>> {
    let n = pts.len();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        'pair: for j in 0..n {
            if i == j || pts[i] == pts[j] {
                continue;
            }
            for (k, p) in pts.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let c = cross(pts[i], pts[j], *p);
                if c < 0.0 {
                    continue 'pair;
                }
                if c == 0.0 {
                    let within_x = p.x >= pts[i].x.min(pts[j].x) && p.x <= pts[i].x.max(pts[j].x);
                    let within_y = p.y >= pts[i].y.min(pts[j].y) && p.y <= pts[i].y.max(pts[j].y);
                    if !(within_x && within_y) || *p == pts[i] || *p == pts[j] {
                        continue 'pair;
                    }
                }
            }
            edges.push((i, j));
        }
    }
    if edges.len() < 3 {
        return None;
    }
    // Chain the directed edges into one cycle.
    let mut cycle = vec![edges[0].0, edges[0].1];
    while cycle.len() < edges.len() {
        let tail = *cycle.last().unwrap();
        let next = edges.iter().find(|(a, _)| *a == tail)?;
        if next.1 == cycle[0] {
            break;
        }
        cycle.push(next.1);
    }
    Some(cycle.into_iter().map(|i| pts[i]).collect())
}

fn cyclically_equal(a: &[Point], b: &[Point]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    (0..n).any(|shift| (0..n).all(|i| a[i] == b[(i + shift) % n]))
}

#[test]
fn hull_matches_brute_force_on_random_point_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.gen_range(3..40);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)))
            .collect();
        let Some(oracle) = brute_force_hull(&pts) else {
            continue;
        };
        let hull = convex_hull(&pts).expect("non-degenerate input");
        assert!(
            cyclically_equal(hull.vertices(), &oracle),
            "hull mismatch for {pts:?}: impl {:?} vs oracle {oracle:?}",
            hull.vertices()
        );
        checked += 1;
    }
}

#[test]
fn hull_of_disk_cloud_satisfies_half_plane_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<Point> = (0..1000)
        .map(|_| {
            let r: f64 = rng.gen::<f64>().sqrt() * 1000.0;
            let a: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
            Point::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let hull = convex_hull(&pts).unwrap();
    let vs = hull.vertices();
    // Strictly convex and counter-clockwise.
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        let c = vs[(i + 2) % vs.len()];
        assert!(cross(a, b, c) > 0.0);
    }
    // Every input point lies inside every edge's half-plane.
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        for p in &pts {
            assert!(cross(a, b, *p) >= 0.0);
        }
    }
    // Hull vertices come from the input.
    for v in vs {
        assert!(pts.contains(v));
    }
}

/// Signed distance from a point to the boundary of an axis-aligned square:
/// positive inside, negative outside.
fn square_boundary_margin(center: Point, side: f64, p: Point) -> f64 {
    let h = side / 2.0;
    let dx = h - (p.x - center.x).abs();
    let dy = h - (p.y - center.y).abs();
    dx.min(dy)
}

/// Dense-sampling classifier for a segment against a square fence. Each
/// sample point is classified exactly; the caller guarantees the inputs are
/// non-grazing so the sampling density is sufficient.
fn sampled_predicates(center: Point, side: f64, s: &Segment, samples: usize) -> (bool, bool, bool) {
    let mut any_inside = false;
    let mut any_outside = false;
    let mut any_contact = false;
    for k in 0..=samples {
        let t = k as f64 / samples as f64;
        let p = Point::new(
            s.start.x + t * (s.end.x - s.start.x),
            s.start.y + t * (s.end.y - s.start.y),
        );
        let m = square_boundary_margin(center, side, p);
        if m > 0.0 {
            any_inside = true;
        }
        if m < 0.0 {
            any_outside = true;
        }
        if m >= 0.0 {
            any_contact = true;
        }
    }
    let cross = any_inside && any_outside;
    let cover = !any_outside;
    (cross, cover, any_contact)
}

#[test]
fn predicates_match_dense_sampling_classifier() {
    // 10^4 non-grazing random cases; margins are rejected by construction so
    // 512 samples are guaranteed to see every incursion.
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    let mut checked = 0u32;
    while checked < 10_000 {
        let side = rng.gen_range(200.0..2000.0);
        let center = Point::new(rng.gen_range(-1000.0..1000.0), rng.gen_range(-1000.0..1000.0));
        let a = Point::new(rng.gen_range(-4000.0..4000.0), rng.gen_range(-4000.0..4000.0));
        let b = Point::new(rng.gen_range(-4000.0..4000.0), rng.gen_range(-4000.0..4000.0));
        let seg = Segment::new(a, b);
        let margin = side * 0.02;
        // Exclude grazing inputs: endpoints decisively inside/outside, and any
        // incursion through the square long enough for the sampling to see.
        if square_boundary_margin(center, side, a).abs() < margin
            || square_boundary_margin(center, side, b).abs() < margin
        {
            continue;
        }
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        if len < 1.0 {
            continue;
        }
        if let Some((t0, t1)) = clip_to_square(center, side, &seg) {
            if (t1 - t0) * len < 2.0 * margin {
                continue;
            }
        }
        let samples = 512;
        if len / samples as f64 > margin / 2.0 {
            continue; // segment too long for the fixed density
        }
        let fence = ConvexPolygon::axis_aligned_square(center, side);
        let (want_cross, want_cover, want_overlap) = sampled_predicates(center, side, &seg, samples);
        assert_eq!(eval_predicate(Predicate::Cross, &seg, &fence), want_cross, "cross: {center:?} {side} {seg:?}");
        assert_eq!(eval_predicate(Predicate::Cover, &seg, &fence), want_cover, "cover: {center:?} {side} {seg:?}");
        assert_eq!(eval_predicate(Predicate::Overlap, &seg, &fence), want_overlap, "overlap: {center:?} {side} {seg:?}");
        checked += 1;
    }
}

/// Independent Liang-Barsky clip against the square, used only to reject
/// grazing test inputs.
fn clip_to_square(center: Point, side: f64, s: &Segment) -> Option<(f64, f64)> {
    let h = side / 2.0;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    let d = [s.end.x - s.start.x, s.end.y - s.start.y];
    let a = [s.start.x, s.start.y];
    let lo = [center.x - h, center.y - h];
    let hi = [center.x + h, center.y + h];
    for axis in 0..2 {
        if d[axis] == 0.0 {
            if a[axis] < lo[axis] || a[axis] > hi[axis] {
                return None;
            }
        } else {
            let ta = (lo[axis] - a[axis]) / d[axis];
            let tb = (hi[axis] - a[axis]) / d[axis];
            let (mn, mx) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(mn);
            t1 = t1.min(mx);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((t0, t1))
}

#[test]
fn accumulated_fence_contains_every_input_fence_vertex() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let hops = rng.gen_range(1..8);
        let mut iti = Itinerary::single(
            Point::new(rng.gen_range(-5000.0..5000.0), rng.gen_range(-5000.0..5000.0)),
            1,
        );
        for k in 0..hops {
            let last = iti.last();
            iti.push(
                Point::new(last.x + rng.gen_range(-50.0..50.0), last.y + rng.gen_range(-50.0..50.0)),
                k + 2,
            );
        }
        let side = rng.gen_range(100.0..1500.0);
        let fence_at = |p: Point| ConvexPolygon::axis_aligned_square(p, side);
        let acc = accumulated_fence(&iti, fence_at).unwrap();
        for &p in iti.points() {
            for &v in fence_at(p).vertices() {
                assert!(acc.contains(v), "vertex {v:?} escaped the accumulated fence");
            }
        }
    }
}

proptest! {
    #[test]
    fn hull_invariant_under_permutation_and_duplicates(
        seed in 0u64..1000,
        n in 4usize..24,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)))
            .collect();
        let base = convex_hull(&pts);
        // Shuffle and duplicate some points.
        for i in (1..pts.len()).rev() {
            let j = rng.gen_range(0..=i);
            pts.swap(i, j);
        }
        let dup = pts[rng.gen_range(0..pts.len())];
        pts.push(dup);
        let again = convex_hull(&pts);
        match (base, again) {
            (Ok(a), Ok(b)) => prop_assert!(cyclically_equal(a.vertices(), b.vertices())),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "degeneracy changed under permutation"),
        }
    }

    #[test]
    fn predicates_are_translation_equivariant(
        seed in 0u64..2000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = Point::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let side = rng.gen_range(50.0..400.0);
        let fence = ConvexPolygon::axis_aligned_square(center, side);
        let s = Segment::new(
            Point::new(rng.gen_range(-600.0..600.0), rng.gen_range(-600.0..600.0)),
            Point::new(rng.gen_range(-600.0..600.0), rng.gen_range(-600.0..600.0)),
        );
        // Translations by dyadic offsets keep float arithmetic exact enough to
        // compare decisions bit-for-bit.
        let dx = rng.gen_range(-64i32..64) as f64 * 0.25;
        let dy = rng.gen_range(-64i32..64) as f64 * 0.25;
        let moved_fence = fence.translate(dx, dy);
        let moved_seg = Segment::new(s.start.offset(dx, dy), s.end.offset(dx, dy));
        for p in [Predicate::Cross, Predicate::Cover, Predicate::Overlap] {
            prop_assert_eq!(
                eval_predicate(p, &s, &fence),
                eval_predicate(p, &moved_seg, &moved_fence)
            );
        }
    }

    #[test]
    fn cross_implies_overlap_and_excludes_cover(
        seed in 0u64..2000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fence = ConvexPolygon::axis_aligned_square(
            Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)),
            rng.gen_range(20.0..300.0),
        );
        let s = Segment::new(
            Point::new(rng.gen_range(-400.0..400.0), rng.gen_range(-400.0..400.0)),
            Point::new(rng.gen_range(-400.0..400.0), rng.gen_range(-400.0..400.0)),
        );
        let crosses = eval_predicate(Predicate::Cross, &s, &fence);
        let covers = eval_predicate(Predicate::Cover, &s, &fence);
        let overlaps = eval_predicate(Predicate::Overlap, &s, &fence);
        if crosses {
            prop_assert!(overlaps);
            prop_assert!(!covers);
        }
        if covers {
            prop_assert!(overlaps);
        }
    }
}

#[test]
fn grid_envelope_coverage_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let g = GridConfig::new(Point::new(0.0, 0.0), 10_000.0, 8_000.0, 10, 8).unwrap();
    for _ in 0..200 {
        let x1: f64 = rng.gen_range(0.0..10_000.0);
        let x2: f64 = rng.gen_range(0.0..10_000.0);
        let y1: f64 = rng.gen_range(0.0..8_000.0);
        let y2: f64 = rng.gen_range(0.0..8_000.0);
        let e = Envelope::new(
            Point::new(x1.min(x2), y1.min(y2)),
            Point::new(x1.max(x2), y1.max(y2)),
        );
        let got = g.cells_of_envelope(&e).unwrap();
        let mut want = Vec::new();
        for id in 0..g.cell_count() {
            let c = roam_core::CellId(id);
            if g.cell_extent(c).intersects(&e) {
                want.push(c);
            }
        }
        let mut got_sorted = got.clone();
        got_sorted.sort_unstable();
        assert_eq!(got_sorted, want, "envelope {e:?}");
    }
}

#[test]
fn grid_segment_coverage_matches_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let g = GridConfig::new(Point::new(0.0, 0.0), 10_000.0, 10_000.0, 10, 10).unwrap();
    let step = g.cell_width().min(g.cell_height()) / 16.0;
    for _ in 0..500 {
        let a = Point::new(rng.gen_range(0.0..10_000.0), rng.gen_range(0.0..10_000.0));
        let b = Point::new(
            (a.x + rng.gen_range(-3000.0..3000.0)).clamp(0.0, 10_000.0),
            (a.y + rng.gen_range(-3000.0..3000.0)).clamp(0.0, 10_000.0),
        );
        let s = Segment::new(a, b);
        let mut got = g.cells_of_segment(&s).unwrap();
        got.sort_unstable();
        // Exact oracle: clip the segment against every cell's closed extent
        // with an independent implementation.
        let mut exact = Vec::new();
        for id in 0..g.cell_count() {
            let c = roam_core::CellId(id);
            let e = g.cell_extent(c);
            let center = e.center();
            if clip_to_square(center, e.max.x - e.min.x, &s).is_some() {
                exact.push(c);
            }
        }
        assert_eq!(got, exact, "segment {s:?}");
        // Sampling at 1/16 cell-side steps plus the endpoint cells can only
        // under-approximate (a sample on a shared boundary lands in one of the
        // touching cells): it must be a subset of the exact answer.
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let n = ((len / step).ceil() as usize).max(1);
        let mut sampled: Vec<_> = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                g.cell_of(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))).unwrap()
            })
            .collect();
        sampled.push(g.cell_of(a).unwrap());
        sampled.push(g.cell_of(b).unwrap());
        sampled.sort_unstable();
        sampled.dedup();
        assert!(
            sampled.iter().all(|c| got.binary_search(c).is_ok()),
            "sampled cells escaped the exact answer for {s:?}"
        );
    }
}

#[test]
fn placement_matches_independent_median_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let g = GridConfig::new(Point::new(0.0, 0.0), 8_000.0, 8_000.0, 8, 8).unwrap();
    for shards in [1u32, 2, 4, 8] {
        for _ in 0..20 {
            let weights: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..10.0)).collect();
            let pm = build_placement(&g, shards, &weights).unwrap();
            // Every cell assigned below the shard count.
            assert!(pm.assignments().iter().all(|&s| s < shards));
            // Each shard holds a contiguous rectangle of cells and no shard
            // carries more than the total weight.
            let total: f64 = weights.iter().sum();
            for shard in 0..shards {
                let cells: Vec<(u32, u32)> = (0..64u32)
                    .filter(|&i| pm.shard_of(roam_core::CellId(i)) == shard)
                    .map(|i| (i % 8, i / 8))
                    .collect();
                assert!(!cells.is_empty());
                let (min_x, max_x) = (
                    cells.iter().map(|c| c.0).min().unwrap(),
                    cells.iter().map(|c| c.0).max().unwrap(),
                );
                let (min_y, max_y) = (
                    cells.iter().map(|c| c.1).min().unwrap(),
                    cells.iter().map(|c| c.1).max().unwrap(),
                );
                assert_eq!(cells.len() as u32, (max_x - min_x + 1) * (max_y - min_y + 1));
                let w: f64 = cells.iter().map(|&(x, y)| weights[(y * 8 + x) as usize]).sum();
                assert!(w <= total + 1e-9);
            }
        }
    }
    // All weight in one cell: the heavy cell's shard is isolated down to the
    // minimum feasible rectangle around it.
    let mut weights = vec![0.0; 64];
    weights[27] = 100.0;
    let pm = build_placement(&g, 4, &weights).unwrap();
    let heavy = pm.shard_of(roam_core::CellId(27));
    let heavy_cells = pm.assignments().iter().filter(|&&s| s == heavy).count();
    assert!(heavy_cells < 64 / 2, "heavy shard should be clamped to the minimum side");
}

#[test]
fn rtree_matches_linear_scan_under_churn() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut tree: RTree<u64> = RTree::new();
    let mut shadow: Vec<(Point, u64)> = Vec::new();
    let mut next_id = 0u64;
    for round in 0..1000 {
        let op: f64 = rng.gen();
        if op < 0.55 || shadow.is_empty() {
            let p = Point::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
            tree.insert(p, next_id);
            shadow.push((p, next_id));
            next_id += 1;
        } else {
            let idx = rng.gen_range(0..shadow.len());
            let (p, v) = shadow.swap_remove(idx);
            assert!(tree.remove(p, &v), "round {round}: missing entry");
        }
        assert_eq!(tree.len(), shadow.len());
        if round % 7 == 0 {
            let x1: f64 = rng.gen_range(0.0..1000.0);
            let x2: f64 = rng.gen_range(0.0..1000.0);
            let y1: f64 = rng.gen_range(0.0..1000.0);
            let y2: f64 = rng.gen_range(0.0..1000.0);
            let w = Envelope::new(
                Point::new(x1.min(x2), y1.min(y2)),
                Point::new(x1.max(x2), y1.max(y2)),
            );
            let mut got: Vec<u64> = tree.query(&w).into_iter().map(|(_, v)| v).collect();
            got.sort_unstable();
            let mut want: Vec<u64> = shadow
                .iter()
                .filter(|(p, _)| w.contains(*p))
                .map(|&(_, v)| v)
                .collect();
            want.sort_unstable();
            assert_eq!(got, want, "round {round}");
        }
    }
}

#[test]
fn accumulated_fence_grows_monotonically_with_the_itinerary() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let side = rng.gen_range(100.0..800.0);
        let fence_at = |p: Point| ConvexPolygon::axis_aligned_square(p, side);
        let mut iti = Itinerary::single(
            Point::new(rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0)),
            1,
        );
        let mut prev = accumulated_fence(&iti, fence_at).unwrap();
        for k in 0..6u64 {
            let last = iti.last();
            iti.push(
                Point::new(last.x + rng.gen_range(-300.0..300.0), last.y + rng.gen_range(-300.0..300.0)),
                k + 2,
            );
            let next = accumulated_fence(&iti, fence_at).unwrap();
            for v in prev.vertices() {
                assert!(next.contains(*v), "accumulated fence shrank at hop {k}");
            }
            prev = next;
        }
    }
}
