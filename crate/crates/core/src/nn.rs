//! Exact nearest-neighbor search with ties resolved to the smallest index.
//!
//! Position 0 of the indexed point list is the conditioned cell center, so
//! "the query lies in the first cell" is `nearest(q) == 0`.

use crate::error::{invalid, Result};
use crate::geometry::{dist2, Point};

pub trait NearestNeighbor {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Index and squared distance of the nearest point; ties go to the smaller index.
    fn nearest(&self, query: &[f64]) -> (usize, f64);
}

fn flatten(points: &[Point<f64>]) -> Result<(usize, Vec<f64>)> {
    let Some(first) = points.first() else {
        return invalid("nearest-neighbor index over an empty point set");
    };
    let dim = first.dim();
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.dim() != dim {
            return invalid(format!("dimension mismatch: {} vs {}", dim, p.dim()));
        }
        flat.extend_from_slice(p.coords());
    }
    Ok((dim, flat))
}

/// Linear scan; the reference implementation.
#[derive(Debug, Clone)]
pub struct BruteForce {
    dim: usize,
    coords: Vec<f64>,
}

impl BruteForce {
    pub fn new(points: &[Point<f64>]) -> Result<Self> {
        let (dim, coords) = flatten(points)?;
        Ok(Self { dim, coords })
    }
}

impl NearestNeighbor for BruteForce {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    fn nearest(&self, query: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.coords.chunks_exact(self.dim).enumerate() {
            let d2 = dist2(p, query);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }
}

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u32, value: f64, left: u32, right: u32 },
}

/// Median-split kd-tree with bucketed leaves.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    // point coordinates permuted into leaf order, with their original indices
    coords: Vec<f64>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Point<f64>]) -> Result<Self> {
        let (dim, flat) = flatten(points)?;
        Ok(Self::from_flat(dim, &flat))
    }

    /// Builds from row-major coordinates (`coords.len()` a multiple of `dim`).
    pub fn from_flat(dim: usize, coords: &[f64]) -> Self {
        assert!(dim >= 1 && coords.len().is_multiple_of(dim) && !coords.is_empty());
        let n = coords.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build(dim, coords, &mut order, 0, &mut nodes);
        let mut permuted = Vec::with_capacity(coords.len());
        for &i in &order {
            let i = i as usize;
            permuted.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        Self { dim, coords: permuted, ids: order, nodes }
    }

    fn search(&self, node: usize, query: &[f64], best: &mut (u32, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let p = &self.coords[slot * self.dim..(slot + 1) * self.dim];
                    let d2 = dist2(p, query);
                    let id = self.ids[slot];
                    if d2 < best.1 || (d2 == best.1 && id < best.0) {
                        *best = (id, d2);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, query, best);
                // closed comparison keeps equidistant candidates reachable
                if diff * diff <= best.1 {
                    self.search(far as usize, query, best);
                }
            }
        }
    }
}

fn build(dim: usize, coords: &[f64], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + order.len()) as u32 });
        return id;
    }
    let coord = |i: u32, a: usize| coords[i as usize * dim + a];
    // split along the axis of largest spread
    let axis = (0..dim)
        .map(|a| {
            let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let c = coord(i, a);
                (lo.min(c), hi.max(c))
            });
            (a, hi - lo)
        })
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map_or(0, |(a, _)| a);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&i, &j| coord(i, axis).total_cmp(&coord(j, axis)));
    let value = coord(order[mid], axis);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(dim, coords, lo, offset, nodes);
    let right = build(dim, coords, hi, offset + mid, nodes);
    nodes[id as usize] = Node::Split { axis: axis as u32, value, left, right };
    id
}

impl NearestNeighbor for KdTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn nearest(&self, query: &[f64]) -> (usize, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        (best.0 as usize, best.1)
    }
}

/// Either implementation behind one type.
#[derive(Debug, Clone)]
pub enum NnIndex {
    BruteForce(BruteForce),
    KdTree(KdTree),
}

impl NearestNeighbor for NnIndex {
    fn dim(&self) -> usize {
        match self {
            NnIndex::BruteForce(b) => b.dim(),
            NnIndex::KdTree(t) => t.dim(),
        }
    }

    fn len(&self) -> usize {
        match self {
            NnIndex::BruteForce(b) => b.len(),
            NnIndex::KdTree(t) => t.len(),
        }
    }

    fn nearest(&self, query: &[f64]) -> (usize, f64) {
        match self {
            NnIndex::BruteForce(b) => b.nearest(query),
            NnIndex::KdTree(t) => t.nearest(query),
        }
    }
}

/// Space-partitioning index over `points` (position 0 is the cell center).
pub fn build_nn_index(points: &[Point<f64>]) -> Result<NnIndex> {
    Ok(NnIndex::KdTree(KdTree::new(points)?))
}
