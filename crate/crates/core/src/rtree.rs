//! A small in-memory R-tree over points with a fan-out of 16 and quadratic
//! node splitting. One instance indexes the locations of the actors inside a
//! single grid cell, so trees stay shallow; correctness matters more than
//! bulk-load tricks here and every operation is checked against a linear-scan
//! oracle in the tests.

use alloc::vec::Vec;

use crate::geom::{Envelope, Point};

const MAX_ENTRIES: usize = 16;
const MIN_ENTRIES: usize = 6; // ~40% fill

#[derive(Debug, Clone)]
struct LeafEntry<V> {
    point: Point,
    value: V,
}

#[derive(Debug, Clone)]
enum NodeKind<V> {
    Leaf(Vec<LeafEntry<V>>),
    Inner(Vec<Node<V>>),
}

#[derive(Debug, Clone)]
struct Node<V> {
    mbr: Envelope,
    kind: NodeKind<V>,
}

impl<V: Copy + Eq> Node<V> {
    fn leaf(entries: Vec<LeafEntry<V>>) -> Self {
        let mbr = mbr_of_entries(&entries);
        Node { mbr, kind: NodeKind::Leaf(entries) }
    }

    fn inner(children: Vec<Node<V>>) -> Self {
        let mbr = mbr_of_children(&children);
        Node { mbr, kind: NodeKind::Inner(children) }
    }

    fn len(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf(e) => e.len(),
            NodeKind::Inner(c) => c.len(),
        }
    }

    /// Inserts and returns a sibling when this node split.
    fn insert(&mut self, point: Point, value: V) -> Option<Node<V>> {
        self.mbr.expand_to(point);
        match &mut self.kind {
            NodeKind::Leaf(entries) => {
                entries.push(LeafEntry { point, value });
                if entries.len() > MAX_ENTRIES {
                    let (a, b) = quadratic_split_leaf(core::mem::take(entries));
                    *self = Node::leaf(a);
                    Some(Node::leaf(b))
                } else {
                    None
                }
            }
            NodeKind::Inner(children) => {
                let idx = choose_subtree(children, point);
                if let Some(sibling) = children[idx].insert(point, value) {
                    children.push(sibling);
                    if children.len() > MAX_ENTRIES {
                        let (a, b) = quadratic_split_inner(core::mem::take(children));
                        *self = Node::inner(a);
                        return Some(Node::inner(b));
                    }
                }
                None
            }
        }
    }

    /// Removes the exact (point, value) entry. Underfull nodes along the path
    /// are dissolved by the caller, which reinserts their remaining entries.
    fn remove(&mut self, point: Point, value: &V, orphans: &mut Vec<LeafEntry<V>>) -> bool {
        match &mut self.kind {
            NodeKind::Leaf(entries) => {
                let before = entries.len();
                entries.retain(|e| !(e.point == point && e.value == *value));
                if entries.len() == before {
                    return false;
                }
                self.mbr = mbr_of_entries(entries);
                true
            }
            NodeKind::Inner(children) => {
                let mut removed = false;
                for i in 0..children.len() {
                    if children[i].mbr.contains(point) && children[i].remove(point, value, orphans) {
                        removed = true;
                        if children[i].len() < MIN_ENTRIES {
                            let dead = children.remove(i);
                            collect_entries(dead, orphans);
                        }
                        break;
                    }
                }
                if removed {
                    self.mbr = mbr_of_children(children);
                }
                removed
            }
        }
    }

    fn query(&self, window: &Envelope, out: &mut Vec<(Point, V)>) {
        if !self.mbr.intersects(window) {
            return;
        }
        match &self.kind {
            NodeKind::Leaf(entries) => {
                for e in entries {
                    if window.contains(e.point) {
                        out.push((e.point, e.value));
                    }
                }
            }
            NodeKind::Inner(children) => {
                for c in children {
                    c.query(window, out);
                }
            }
        }
    }
}

fn mbr_of_entries<V>(entries: &[LeafEntry<V>]) -> Envelope {
    let mut it = entries.iter();
    let first = it.next().map(|e| e.point).unwrap_or(Point::new(0.0, 0.0));
    let mut mbr = Envelope::of_point(first);
    for e in it {
        mbr.expand_to(e.point);
    }
    mbr
}

fn mbr_of_children<V>(children: &[Node<V>]) -> Envelope {
    let mut it = children.iter();
    let mut mbr = it.next().map(|c| c.mbr).unwrap_or(Envelope::of_point(Point::new(0.0, 0.0)));
    for c in it {
        mbr = mbr.union(&c.mbr);
    }
    mbr
}

fn collect_entries<V: Copy + Eq>(node: Node<V>, out: &mut Vec<LeafEntry<V>>) {
    match node.kind {
        NodeKind::Leaf(mut entries) => out.append(&mut entries),
        NodeKind::Inner(children) => {
            for c in children {
                collect_entries(c, out);
            }
        }
    }
}

fn enlargement(mbr: &Envelope, p: Point) -> f64 {
    let mut grown = *mbr;
    grown.expand_to(p);
    grown.area() - mbr.area()
}

fn choose_subtree<V>(children: &[Node<V>], point: Point) -> usize {
    let mut best = 0;
    let mut best_enlarge = f64::INFINITY;
    let mut best_area = f64::INFINITY;
    for (i, c) in children.iter().enumerate() {
        let e = enlargement(&c.mbr, point);
        let a = c.mbr.area();
        if e < best_enlarge || (e == best_enlarge && a < best_area) {
            best = i;
            best_enlarge = e;
            best_area = a;
        }
    }
    best
}

/// Quadratic split: seed with the pair wasting the most area together, then
/// assign each remaining item to the group whose bounds grow the least,
/// forcing assignment when a group must absorb the rest to reach MIN_ENTRIES.
fn quadratic_split<T>(items: Vec<T>, rect_of: impl Fn(&T) -> Envelope) -> (Vec<T>, Vec<T>) {
    debug_assert!(items.len() > MAX_ENTRIES);
    let n = items.len();
    let (mut s1, mut s2) = (0, 1);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let combined = rect_of(&items[i]).union(&rect_of(&items[j]));
            let dead = combined.area() - rect_of(&items[i]).area() - rect_of(&items[j]).area();
            if dead > worst {
                worst = dead;
                s1 = i;
                s2 = j;
            }
        }
    }
    let mut group_a: Vec<T> = Vec::new();
    let mut group_b: Vec<T> = Vec::new();
    let mut mbr_a = rect_of(&items[s1]);
    let mut mbr_b = rect_of(&items[s2]);
    let mut rest: Vec<T> = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        if i == s1 {
            group_a.push(item);
        } else if i == s2 {
            group_b.push(item);
        } else {
            rest.push(item);
        }
    }
    let mut remaining = rest.len();
    for item in rest {
        let r = rect_of(&item);
        // Force-assign when one group needs all remaining items.
        if group_a.len() + remaining <= MIN_ENTRIES {
            mbr_a = mbr_a.union(&r);
            group_a.push(item);
        } else if group_b.len() + remaining <= MIN_ENTRIES {
            mbr_b = mbr_b.union(&r);
            group_b.push(item);
        } else {
            let grow_a = mbr_a.union(&r).area() - mbr_a.area();
            let grow_b = mbr_b.union(&r).area() - mbr_b.area();
            if grow_a < grow_b || (grow_a == grow_b && group_a.len() <= group_b.len()) {
                mbr_a = mbr_a.union(&r);
                group_a.push(item);
            } else {
                mbr_b = mbr_b.union(&r);
                group_b.push(item);
            }
        }
        remaining -= 1;
    }
    (group_a, group_b)
}

fn quadratic_split_leaf<V: Copy + Eq>(entries: Vec<LeafEntry<V>>) -> (Vec<LeafEntry<V>>, Vec<LeafEntry<V>>) {
    quadratic_split(entries, |e| Envelope::of_point(e.point))
}

type SplitNodes<V> = (Vec<Node<V>>, Vec<Node<V>>);

fn quadratic_split_inner<V: Copy + Eq>(children: Vec<Node<V>>) -> SplitNodes<V> {
    quadratic_split(children, |c| c.mbr)
}

/// Point R-tree mapping locations to values. Multiple entries may share a
/// point as long as the values differ; `(point, value)` pairs are unique.
#[derive(Debug, Clone, Default)]
pub struct RTree<V> {
    root: Option<Node<V>>,
    len: usize,
}

impl<V: Copy + Eq> RTree<V> {
    pub fn new() -> Self {
        RTree { root: None, len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, point: Point, value: V) {
        self.len += 1;
        match &mut self.root {
            None => {
                self.root = Some(Node::leaf(alloc::vec![LeafEntry { point, value }]));
            }
            Some(root) => {
                if let Some(sibling) = root.insert(point, value) {
                    let old = self.root.take().expect("root present");
                    self.root = Some(Node::inner(alloc::vec![old, sibling]));
                }
            }
        }
    }

    /// Removes one `(point, value)` entry; false when absent.
    pub fn remove(&mut self, point: Point, value: &V) -> bool {
        let Some(root) = &mut self.root else {
            return false;
        };
        let mut orphans: Vec<LeafEntry<V>> = Vec::new();
        if !root.remove(point, value, &mut orphans) {
            return false;
        }
        self.len -= 1;
        // Shrink a root that lost its fan-out.
        while let Some(node) = &mut self.root {
            match &mut node.kind {
                NodeKind::Inner(children) if children.len() == 1 => {
                    let child = children.pop().expect("one child");
                    self.root = Some(child);
                }
                NodeKind::Inner(children) if children.is_empty() => self.root = None,
                NodeKind::Leaf(entries) if entries.is_empty() => self.root = None,
                _ => break,
            }
        }
        for e in orphans {
            self.len -= 1;
            self.insert(e.point, e.value);
        }
        true
    }

    /// All entries whose point lies in the closed window.
    pub fn query(&self, window: &Envelope) -> Vec<(Point, V)> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            root.query(window, &mut out);
        }
        out
    }

    pub fn iter_all(&self) -> Vec<(Point, V)> {
        match &self.root {
            Some(root) => self.query(&root.mbr),
            None => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_query_remove_roundtrip() {
        let mut t: RTree<u32> = RTree::new();
        for i in 0..100u32 {
            t.insert(Point::new((i % 10) as f64, (i / 10) as f64), i);
        }
        assert_eq!(t.len(), 100);
        let window = Envelope::new(Point::new(0.0, 0.0), Point::new(4.0, 4.0));
        let mut got: Vec<u32> = t.query(&window).into_iter().map(|(_, v)| v).collect();
        got.sort_unstable();
        let want: Vec<u32> = (0..100).filter(|i| i % 10 <= 4 && i / 10 <= 4).collect();
        assert_eq!(got, want);

        for i in 0..50u32 {
            assert!(t.remove(Point::new((i % 10) as f64, (i / 10) as f64), &i));
        }
        assert_eq!(t.len(), 50);
        assert!(!t.remove(Point::new(0.0, 0.0), &0));
        let rest: Vec<u32> = t.iter_all().into_iter().map(|(_, v)| v).collect();
        assert_eq!(rest.len(), 50);
        assert!(rest.iter().all(|&v| v >= 50));
    }

    #[test]
    fn boundary_points_are_included() {
        let mut t: RTree<u32> = RTree::new();
        t.insert(Point::new(5.0, 5.0), 1);
        let window = Envelope::new(Point::new(0.0, 0.0), Point::new(5.0, 5.0));
        assert_eq!(t.query(&window).len(), 1);
        let miss = Envelope::new(Point::new(0.0, 0.0), Point::new(4.999, 5.0));
        assert!(t.query(&miss).is_empty());
    }

    #[test]
    fn duplicate_points_with_distinct_values() {
        let mut t: RTree<u32> = RTree::new();
        let p = Point::new(1.0, 1.0);
        t.insert(p, 1);
        t.insert(p, 2);
        assert_eq!(t.query(&Envelope::of_point(p)).len(), 2);
        assert!(t.remove(p, &1));
        let left = t.query(&Envelope::of_point(p));
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].1, 2);
    }

    #[test]
    fn empty_after_removing_everything() {
        let mut t: RTree<u32> = RTree::new();
        for i in 0..40u32 {
            t.insert(Point::new(i as f64, -(i as f64)), i);
        }
        for i in 0..40u32 {
            assert!(t.remove(Point::new(i as f64, -(i as f64)), &i));
        }
        assert!(t.is_empty());
        assert!(t.iter_all().is_empty());
    }
}
