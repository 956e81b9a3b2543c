//! Greedy k-dominating-set anchor selection and verification.
//!
//! The selection loop keeps every node "labeled" until some anchor's k-hop
//! ball swallows it: repeatedly take a maximum-degree labeled node (ties
//! broken uniformly at random), add it to the anchor set, and unlabel its
//! entire k-hop neighborhood in the original graph. Degrees are the static
//! degrees computed once up front; the ball is always taken in the full
//! graph, never a residual one.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BfsScratch, Graph, NodeId, UNREACHABLE};

/// A k-dominating anchor set together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    nodes: Vec<NodeId>,
    k: u32,
    seed: u64,
    membership: Vec<bool>,
}

impl AnchorSet {
    /// Wrap an explicit node set. Ids are validated, sorted, and deduped.
    /// Whether the set actually dominates is checked separately by
    /// [`verify_dominating`]; batch-restricted sets may legitimately fail it.
    pub fn from_nodes(n: usize, mut nodes: Vec<NodeId>, k: u32, seed: u64) -> Result<Self> {
        assert!(k >= 1, "anchor sets require k >= 1");
        nodes.sort_unstable();
        nodes.dedup();
        let mut membership = vec![false; n];
        for &v in &nodes {
            if v as usize >= n {
                return Err(Error::NodeOutOfRange { node: v, n });
            }
            membership[v as usize] = true;
        }
        Ok(AnchorSet {
            nodes,
            k,
            seed,
            membership,
        })
    }

    /// Sorted anchor ids.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.membership[v as usize]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&AnchorSetFile {
            k: self.k,
            seed: self.seed,
            anchors: self.nodes.clone(),
        })
        .expect("anchor set serializes")
    }

    /// Parse the `{"k", "seed", "anchors"}` JSON form back into a set over a
    /// graph with `n` nodes.
    pub fn from_json(json: &str, n: usize) -> Result<Self> {
        let file: AnchorSetFile = serde_json::from_str(json)?;
        AnchorSet::from_nodes(n, file.anchors, file.k, file.seed)
    }
}

#[derive(Serialize, Deserialize)]
struct AnchorSetFile {
    k: u32,
    seed: u64,
    anchors: Vec<NodeId>,
}

/// Greedy k-dominating-set selection.
///
/// Deterministic for a given `(g, k, seed)`. Every component receives
/// anchors; isolated nodes end up as their own anchors. The maximum-degree
/// argmax runs over a bucket queue keyed by static degree, with lazy
/// deletion of unlabeled entries, so total selection work is
/// O(n + Σ ball sizes).
pub fn select_anchors(g: &Graph, k: u32, seed: u64) -> AnchorSet {
    assert!(k >= 1, "anchor selection requires k >= 1");
    let n = g.node_count();
    let mut anchors: Vec<NodeId> = Vec::new();
    if n > 0 {
        let max_deg = g.nodes().map(|v| g.degree(v)).max().unwrap_or(0);
        let mut buckets: Vec<Vec<NodeId>> = vec![Vec::new(); max_deg + 1];
        for v in g.nodes() {
            buckets[g.degree(v)].push(v);
        }
        let mut labeled = vec![true; n];
        let mut labeled_left = n;
        let mut top = max_deg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scratch = BfsScratch::new(n);
        let mut ball = Vec::new();
        while labeled_left > 0 {
            let anchor = loop {
                if buckets[top].is_empty() {
                    top -= 1;
                    continue;
                }
                let bucket = &mut buckets[top];
                let i = rng.gen_range(0..bucket.len());
                let cand = bucket.swap_remove(i);
                if labeled[cand as usize] {
                    break cand;
                }
                // Stale entry: the node was unlabeled by an earlier ball.
            };
            anchors.push(anchor);
            ball.clear();
            scratch.ball(g, anchor, k, &mut ball);
            for &(u, _) in &ball {
                if labeled[u as usize] {
                    labeled[u as usize] = false;
                    labeled_left -= 1;
                }
            }
        }
    }
    AnchorSet::from_nodes(n, anchors, k, seed).expect("selected anchors are valid ids")
}

/// Outcome of a domination check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domination {
    Dominating,
    /// Some node has no anchor within distance k; one such node is returned.
    Uncovered { witness: NodeId },
}

impl Domination {
    pub fn is_dominating(&self) -> bool {
        matches!(self, Domination::Dominating)
    }

    pub fn witness(&self) -> Option<NodeId> {
        match *self {
            Domination::Dominating => None,
            Domination::Uncovered { witness } => Some(witness),
        }
    }
}

/// Check that every node is within distance `s.k()` of some anchor, by a
/// multi-source BFS from all anchors truncated at depth k.
pub fn verify_dominating(g: &Graph, s: &AnchorSet) -> Domination {
    let n = g.node_count();
    let k = s.k();
    let mut dist = vec![UNREACHABLE; n];
    let mut queue = VecDeque::new();
    for &a in s.nodes() {
        dist[a as usize] = 0;
        queue.push_back(a);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        if du == k {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist[w as usize] == UNREACHABLE {
                dist[w as usize] = du + 1;
                queue.push_back(w);
            }
        }
    }
    match dist.iter().position(|&d| d == UNREACHABLE) {
        None => Domination::Dominating,
        Some(v) => Domination::Uncovered {
            witness: v as NodeId,
        },
    }
}

/// Per-k record from [`anchor_sweep`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub k: u32,
    pub anchors: usize,
    pub max_ball: usize,
    pub select_ms: f64,
}

/// Run selection for each k and report set size, the largest k-hop ball in
/// the graph, and selection wall time.
pub fn anchor_sweep(g: &Graph, k_values: &[u32], seed: u64) -> Vec<SweepRecord> {
    assert!(!k_values.is_empty(), "sweep requires at least one k");
    k_values
        .iter()
        .map(|&k| {
            let start = Instant::now();
            let s = select_anchors(g, k, seed);
            let select_ms = start.elapsed().as_secs_f64() * 1e3;
            let max_ball = crate::graph::k_hop_sizes(g, k).into_iter().max().unwrap_or(0);
            SweepRecord {
                k,
                anchors: s.len(),
                max_ball,
                select_ms,
            }
        })
        .collect()
}
