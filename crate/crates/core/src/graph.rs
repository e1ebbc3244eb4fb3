//! Adaptive top-K neighbor graph from the reconstructed adjacency, and its
//! fusion with the observed graph into a confidence-weighted graph.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::dataset::BipartiteGraph;
use crate::error::{Error, Result};
use crate::linalg::TruncatedFactors;

const USER_BLOCK: usize = 16;

/// Candidate ordered so that the heap's maximum is the weakest kept item:
/// lower score is weaker, and on equal scores the larger index is weaker.
#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    item: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.item.cmp(&other.item))
    }
}

/// Indices of the `k` largest scores, ties broken by ascending index,
/// returned sorted by index.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<u32> {
    if k == 0 {
        return Vec::new();
    }
    if k >= scores.len() {
        return (0..scores.len() as u32).collect();
    }
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for (item, &score) in scores.iter().enumerate() {
        let cand = Candidate { score, item: item as u32 };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(mut weakest) = heap.peek_mut() {
            if cand < *weakest {
                *weakest = cand;
            }
        }
    }
    let mut items: Vec<u32> = heap.into_iter().map(|c| c.item).collect();
    items.sort_unstable();
    items
}

/// G_SVD: each user keeps the rowD(u) items with the largest reconstructed
/// scores. Already-interacted items stay eligible.
pub fn adaptive_topk_select(factors: &TruncatedFactors, graph: &BipartiteGraph) -> Result<BipartiteGraph> {
    if factors.n_users() < graph.n_users() || factors.n_items() != graph.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "factors cover {}x{}, graph is {}x{}",
            factors.n_users(),
            factors.n_items(),
            graph.n_users(),
            graph.n_items()
        )));
    }
    let n_items = graph.n_items();
    let mut lists = vec![Vec::new(); graph.n_users()];
    let active: Vec<usize> = (0..graph.n_users()).filter(|&u| graph.user_degree(u) > 0).collect();
    let mut scores = vec![0.0; USER_BLOCK * n_items];
    for block in active.chunks(USER_BLOCK) {
        let out = &mut scores[..block.len() * n_items];
        factors.reconstruct_rows_into(block, out)?;
        for (&u, row) in block.iter().zip(out.chunks_exact(n_items)) {
            lists[u] = top_k_indices(row, graph.user_degree(u));
        }
    }
    BipartiteGraph::from_adjacency(n_items, lists)
}

/// Which of the two source graphs contain an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrigin {
    Observed,
    Reconstructed,
    Both,
}

impl EdgeOrigin {
    pub fn in_observed(self) -> bool {
        matches!(self, EdgeOrigin::Observed | EdgeOrigin::Both)
    }

    pub fn in_reconstructed(self) -> bool {
        matches!(self, EdgeOrigin::Reconstructed | EdgeOrigin::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedEdge {
    pub item: u32,
    pub weight: u32,
    pub origin: EdgeOrigin,
}

/// Ĝ: union of G and G_SVD with weight s on agreeing edges and 1 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedBipartiteGraph {
    n_items: usize,
    replication: u32,
    offsets: Vec<usize>,
    edges: Vec<WeightedEdge>,
}

impl WeightedBipartiteGraph {
    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// The replication weight s.
    pub fn replication(&self) -> u32 {
        self.replication
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, u: usize) -> &[WeightedEdge] {
        &self.edges[self.offsets[u]..self.offsets[u + 1]]
    }

    /// |P_u^Ĝ|
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn weight(&self, u: usize, p: u32) -> u32 {
        let edges = self.edges(u);
        edges.binary_search_by_key(&p, |e| e.item).map_or(0, |k| edges[k].weight)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| u64::from(e.weight)).sum()
    }

    /// All edges as (user, edge).
    pub fn iter(&self) -> impl Iterator<Item = (u32, &WeightedEdge)> + '_ {
        (0..self.n_users()).flat_map(move |u| self.edges(u).iter().map(move |e| (u as u32, e)))
    }
}

/// Merges G and G_SVD, weighting edges present in both by `s`.
pub fn fuse_graphs(observed: &BipartiteGraph, reconstructed: &BipartiteGraph, s: u32) -> Result<WeightedBipartiteGraph> {
    if s == 0 {
        return Err(Error::param("s", "replication weight must be a positive integer"));
    }
    if observed.n_users() != reconstructed.n_users() || observed.n_items() != reconstructed.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "G is {}x{} but G_SVD is {}x{}",
            observed.n_users(),
            observed.n_items(),
            reconstructed.n_users(),
            reconstructed.n_items()
        )));
    }
    let mut offsets = Vec::with_capacity(observed.n_users() + 1);
    offsets.push(0);
    let mut edges = Vec::with_capacity(observed.n_edges() + reconstructed.n_edges());
    for u in 0..observed.n_users() {
        let (a, b) = (observed.neighbors(u), reconstructed.neighbors(u));
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let edge = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    WeightedEdge { item: x, weight: s, origin: EdgeOrigin::Both }
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    WeightedEdge { item: x, weight: 1, origin: EdgeOrigin::Observed }
                }
                (Some(&x), None) => {
                    i += 1;
                    WeightedEdge { item: x, weight: 1, origin: EdgeOrigin::Observed }
                }
                (_, Some(&y)) => {
                    j += 1;
                    WeightedEdge { item: y, weight: 1, origin: EdgeOrigin::Reconstructed }
                }
                (None, None) => unreachable!(),
            };
            edges.push(edge);
        }
        offsets.push(edges.len());
    }
    Ok(WeightedBipartiteGraph { n_items: observed.n_items(), replication: s, offsets, edges })
}
