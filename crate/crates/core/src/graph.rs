//! Immutable CSR graph, BFS shortest paths, k-hop balls, and random generators.
//!
//! Graphs are undirected and unweighted, stored as sorted compressed adjacency
//! rows. All structures here are immutable after construction and safe to
//! share across threads.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Node identifier. Graphs address nodes with dense ids `0..n`.
pub type NodeId = u32;

/// Sentinel distance for nodes not reached by a search. Kept distinct from
/// every finite hop count so downstream encodings cannot alias it.
pub const UNREACHABLE: u32 = u32::MAX;

/// Immutable undirected graph in compressed sparse row form.
///
/// Invariants established by every constructor: neighbor lists are sorted
/// ascending, free of duplicates and self-loops, and symmetric
/// (`u ∈ adj(v) ⇔ v ∈ adj(u)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
}

impl Graph {
    /// Build a canonical graph from an arbitrary edge list.
    ///
    /// The input may contain duplicates, self-loops, and both orientations of
    /// the same edge; all of those are normalized away. Ids outside `0..n`
    /// are rejected with the offending pair.
    pub fn from_edge_list(pairs: &[(NodeId, NodeId)], n: usize) -> Result<Self> {
        for &(u, v) in pairs {
            if u as usize >= n || v as usize >= n {
                return Err(Error::EdgeOutOfRange { u, v, n });
            }
        }
        let mut counts = vec![0usize; n + 1];
        for &(u, v) in pairs {
            if u == v {
                continue;
            }
            counts[u as usize + 1] += 1;
            counts[v as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut neighbors = vec![0 as NodeId; offsets[n]];
        let mut cursor = offsets.clone();
        for &(u, v) in pairs {
            if u == v {
                continue;
            }
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        // Sort and dedup each row, then compact.
        let mut write = 0usize;
        let mut new_offsets = vec![0usize; n + 1];
        for v in 0..n {
            let (start, end) = (offsets[v], offsets[v + 1]);
            neighbors[start..end].sort_unstable();
            let mut prev: Option<NodeId> = None;
            for i in start..end {
                let u = neighbors[i];
                if prev != Some(u) {
                    neighbors[write] = u;
                    write += 1;
                    prev = Some(u);
                }
            }
            new_offsets[v + 1] = write;
        }
        neighbors.truncate(write);
        Ok(Graph {
            offsets: new_offsets,
            neighbors,
        })
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sorted neighbor ids of `v`.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    /// Undirected edges as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if (v as usize) < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: v,
                n: self.node_count(),
            })
        }
    }
}

/// Per-node hop distances from one source, with an optional search bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpdTable {
    source: NodeId,
    cap: Option<u32>,
    dist: Vec<u32>,
}

impl SpdTable {
    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Hop bound the search was truncated at, if any.
    pub fn cap(&self) -> Option<u32> {
        self.cap
    }

    /// Raw distances with the [`UNREACHABLE`] sentinel.
    pub fn raw(&self) -> &[u32] {
        &self.dist
    }

    /// Distance to `v`, or `None` when `v` was not reached (disconnected, or
    /// beyond the cap for a truncated search).
    pub fn distance(&self, v: NodeId) -> Option<u32> {
        match self.dist[v as usize] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }
}

/// Exact hop distances from `source`, truncated at `cap` when given.
///
/// Nodes beyond the cap or in another component get [`UNREACHABLE`].
pub fn bfs_spd(g: &Graph, source: NodeId, cap: Option<u32>) -> Result<SpdTable> {
    g.check_node(source)?;
    let n = g.node_count();
    let mut dist = vec![UNREACHABLE; n];
    dist[source as usize] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        if let Some(c) = cap {
            if du == c {
                continue;
            }
        }
        for &w in g.neighbors(u) {
            if dist[w as usize] == UNREACHABLE {
                dist[w as usize] = du + 1;
                queue.push_back(w);
            }
        }
    }
    Ok(SpdTable { source, cap, dist })
}

/// Inclusive k-hop neighborhood of `v`: every `u` with `SPD(v, u) ≤ k`,
/// `v` itself included. Returned sorted ascending.
pub fn k_hop(g: &Graph, v: NodeId, k: u32) -> Result<Vec<NodeId>> {
    g.check_node(v)?;
    assert!(k >= 1, "k-hop neighborhoods require k >= 1");
    let mut scratch = BfsScratch::new(g.node_count());
    let mut out = Vec::new();
    scratch.ball(g, v, k, &mut out);
    let mut ids: Vec<NodeId> = out.into_iter().map(|(u, _)| u).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// `|N_k(v)|` for every node, sharing one BFS workspace.
pub fn k_hop_sizes(g: &Graph, k: u32) -> Vec<usize> {
    let mut scratch = BfsScratch::new(g.node_count());
    let mut buf = Vec::new();
    g.nodes()
        .map(|v| {
            buf.clear();
            scratch.ball(g, v, k, &mut buf);
            buf.len()
        })
        .collect()
}

/// Connected-component label per node (labels are dense, assigned in id order).
pub fn components(g: &Graph) -> Vec<u32> {
    let n = g.node_count();
    let mut label = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for v in 0..n as NodeId {
        if label[v as usize] != u32::MAX {
            continue;
        }
        label[v as usize] = next;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if label[w as usize] == u32::MAX {
                    label[w as usize] = next;
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Reusable truncated-BFS workspace. Visit marks are epoch-stamped so
/// repeated searches on the same graph avoid O(n) clears.
pub struct BfsScratch {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
}

impl BfsScratch {
    pub fn new(n: usize) -> Self {
        BfsScratch {
            stamp: vec![0; n],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Push every `(u, SPD(v, u))` with distance ≤ `k` onto `out`, in BFS
    /// order (`v` itself first, at distance 0).
    pub fn ball(&mut self, g: &Graph, v: NodeId, k: u32, out: &mut Vec<(NodeId, u32)>) {
        if self.epoch == u32::MAX {
            self.stamp.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        let epoch = self.epoch;
        self.frontier.clear();
        self.frontier.push(v);
        self.stamp[v as usize] = epoch;
        out.push((v, 0));
        for depth in 1..=k {
            self.next.clear();
            for &u in &self.frontier {
                for &w in g.neighbors(u) {
                    if self.stamp[w as usize] != epoch {
                        self.stamp[w as usize] = epoch;
                        self.next.push(w);
                        out.push((w, depth));
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
            if self.frontier.is_empty() {
                break;
            }
        }
    }
}

/// G(n, p) random graph: each unordered pair is an edge independently with
/// probability `p`. Deterministic for a given `(n, p, seed)`.
///
/// Pairs are sampled in linear-index order with geometric gap skipping, so
/// generation costs O(n + E) instead of a Bernoulli draw per pair.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidProbability(p));
    }
    if n == 0 || p == 0.0 {
        return Graph::from_edge_list(&[], n);
    }
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    if p == 1.0 {
        for u in 0..n as NodeId {
            for v in (u + 1)..n as NodeId {
                edges.push((u, v));
            }
        }
        return Graph::from_edge_list(&edges, n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_pairs = (n as u64) * (n as u64 - 1) / 2;
    let log1p = (1.0 - p).ln();
    // Cursor decoding linear pair index -> (row, col) incrementally.
    let mut row = 0u64;
    let mut row_start = 0u64;
    let mut t = 0u64;
    loop {
        let r: f64 = rng.gen();
        let skip = ((1.0 - r).ln() / log1p).floor() as u64;
        t = t.saturating_add(skip);
        if t >= total_pairs {
            break;
        }
        while t - row_start >= n as u64 - 1 - row {
            row_start += n as u64 - 1 - row;
            row += 1;
        }
        let col = row + 1 + (t - row_start);
        edges.push((row as NodeId, col as NodeId));
        t += 1;
    }
    Graph::from_edge_list(&edges, n)
}
