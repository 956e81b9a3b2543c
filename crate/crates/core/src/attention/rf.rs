//! Receptive fields: per-node key sets `R(v) = N_k(v) ∪ S` with one SPD
//! bucket per entry, stored as compressed sparse rows.

use std::collections::HashMap;

use crate::anchor::AnchorSet;
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::graph::{components, BfsScratch, Graph, NodeId, UNREACHABLE};

/// Sparse row structure over all attended pairs.
///
/// Row `v` holds the sorted, deduplicated union of v's inclusive k-hop ball
/// and the anchor set; a node in both appears once, keyed by its true SPD
/// bucket. Every row contains `v` itself, so rows are never empty.
#[derive(Debug, Clone)]
pub struct ReceptiveField {
    config: EncodingConfig,
    anchor_count: usize,
    offsets: Vec<usize>,
    cols: Vec<NodeId>,
    buckets: Vec<u16>,
    ball_sizes: Vec<u32>,
}

impl ReceptiveField {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_count
    }

    /// Column ids and bucket codes of row `v`.
    pub fn row(&self, v: NodeId) -> (&[NodeId], &[u16]) {
        let (a, b) = (self.offsets[v as usize], self.offsets[v as usize + 1]);
        (&self.cols[a..b], &self.buckets[a..b])
    }

    pub fn row_len(&self, v: NodeId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Total attended pairs Σ|R(v)|, the sparse path's work measure.
    pub fn attended_pairs(&self) -> u64 {
        self.cols.len() as u64
    }

    /// `|N_k(v)|` per node, as counted during construction.
    pub fn ball_sizes(&self) -> &[u32] {
        &self.ball_sizes
    }

    /// Bytes held by the row structure itself.
    pub fn bytes(&self) -> u64 {
        (self.offsets.len() * std::mem::size_of::<usize>()
            + self.cols.len() * std::mem::size_of::<NodeId>()
            + self.buckets.len() * std::mem::size_of::<u16>()
            + self.ball_sizes.len() * std::mem::size_of::<u32>()) as u64
    }
}

/// Work measure Σ|R(v)| of a built receptive field.
pub fn attended_pair_count(rf: &ReceptiveField) -> u64 {
    rf.attended_pairs()
}

/// Full-attention comparator: n².
pub fn dense_pair_count(n: usize) -> u64 {
    (n as u64) * (n as u64)
}

/// Build `R(v) = N_k(v) ∪ S` for every node, attaching the SPD bucket of
/// each pair.
///
/// Anchor distances come from one truncated BFS per anchor (depth `d_max`);
/// pairs past that depth are classified finite-overflow vs unreachable via
/// connected components, so the two codes never mix.
pub fn build_receptive_field(
    g: &Graph,
    s: &AnchorSet,
    d_max: u32,
) -> Result<ReceptiveField> {
    let config = EncodingConfig::new(s.k(), d_max)?;
    let n = g.node_count();
    let k = s.k();

    // Distance-to-anchor tables, capped at d_max.
    let mut anchor_dist: Vec<Vec<u32>> = Vec::with_capacity(s.len());
    let mut scratch = BfsScratch::new(n);
    let mut buf: Vec<(NodeId, u32)> = Vec::new();
    for &a in s.nodes() {
        let mut dist = vec![UNREACHABLE; n];
        buf.clear();
        scratch.ball(g, a, d_max, &mut buf);
        for &(u, d) in &buf {
            dist[u as usize] = d;
        }
        anchor_dist.push(dist);
    }
    let comp = components(g);

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols: Vec<NodeId> = Vec::new();
    let mut buckets: Vec<u16> = Vec::new();
    let mut ball_sizes = vec![0u32; n];
    let mut ball: Vec<(NodeId, u32)> = Vec::new();
    for v in g.nodes() {
        ball.clear();
        scratch.ball(g, v, k, &mut ball);
        ball_sizes[v as usize] = ball.len() as u32;
        ball.sort_unstable_by_key(|&(u, _)| u);

        // Merge the sorted ball with the sorted anchor list.
        let anchors = s.nodes();
        let (mut i, mut j) = (0usize, 0usize);
        while i < ball.len() || j < anchors.len() {
            let take_ball = match (ball.get(i), anchors.get(j)) {
                (Some(&(bu, _)), Some(&au)) => {
                    if bu == au {
                        // Ball member that is also an anchor: one entry,
                        // keyed by its true (in-ball) distance.
                        j += 1;
                        true
                    } else {
                        bu < au
                    }
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_ball {
                let (u, d) = ball[i];
                cols.push(u);
                buckets.push(config.bucket_for(Some(d)).0);
                i += 1;
            } else {
                let (a_idx, a) = (j, anchors[j]);
                let d = anchor_dist[a_idx][v as usize];
                let bucket = if d != UNREACHABLE {
                    config.bucket_for(Some(d))
                } else if comp[v as usize] == comp[a as usize] {
                    // Reachable but beyond the table depth.
                    config.bucket_for(Some(d_max + 1))
                } else {
                    config.bucket_for(None)
                };
                cols.push(a);
                buckets.push(bucket.0);
                j += 1;
            }
        }
        offsets.push(cols.len());
    }

    Ok(ReceptiveField {
        config,
        anchor_count: s.len(),
        offsets,
        cols,
        buckets,
        ball_sizes,
    })
}

/// A sampled batch, grown by the anchors of the full graph.
#[derive(Debug, Clone)]
pub struct SubgraphBatch {
    /// Induced subgraph over `sampled ∪ anchors`.
    pub graph: Graph,
    /// Local id -> global id, ascending.
    pub global_ids: Vec<NodeId>,
    /// The injected anchors, in local ids, to be used as the batch anchor set.
    pub anchors: AnchorSet,
}

/// Induce the subgraph on `sampled ∪ S`, injecting the full graph's anchors
/// into the batch and remapping them to local ids.
///
/// Whether the injected anchors still dominate the induced subgraph is a
/// property of the sample; run [`crate::anchor::verify_dominating`] on the
/// result to find out.
pub fn augment_subgraph(g: &Graph, s: &AnchorSet, sampled: &[NodeId]) -> Result<SubgraphBatch> {
    if sampled.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    for &v in sampled {
        if v as usize >= g.node_count() {
            return Err(Error::NodeOutOfRange {
                node: v,
                n: g.node_count(),
            });
        }
    }
    let mut global_ids: Vec<NodeId> = sampled.to_vec();
    global_ids.extend_from_slice(s.nodes());
    global_ids.sort_unstable();
    global_ids.dedup();

    let local: HashMap<NodeId, NodeId> = global_ids
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as NodeId))
        .collect();

    let mut edges = Vec::new();
    for (&gu, &lu) in &local {
        for &gv in g.neighbors(gu) {
            if gu < gv {
                if let Some(&lv) = local.get(&gv) {
                    edges.push((lu, lv));
                }
            }
        }
    }
    let graph = Graph::from_edge_list(&edges, global_ids.len())?;
    let anchors = AnchorSet::from_nodes(
        global_ids.len(),
        s.nodes().iter().map(|a| local[a]).collect(),
        s.k(),
        s.seed(),
    )?;
    Ok(SubgraphBatch {
        graph,
        global_ids,
        anchors,
    })
}
