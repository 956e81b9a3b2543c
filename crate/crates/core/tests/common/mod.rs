//! Shared test oracles: brute-force counterparts of the production paths,
//! kept deliberately independent of the implementations they check.

#![allow(dead_code)]

use ndarray::Array2;

use anchor_attention::anchor::AnchorSet;
use anchor_attention::attention::{AttentionLayerParams, NodeFeatures, MASK_LOGIT};
use anchor_attention::encoding::EncodingConfig;
use anchor_attention::graph::{Graph, NodeId};

pub fn graph(edges: &[(u32, u32)], n: usize) -> Graph {
    Graph::from_edge_list(edges, n).unwrap()
}

pub fn p5() -> Graph {
    graph(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5)
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
    graph(&edges, n)
}

pub fn c6() -> Graph {
    graph(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], 6)
}

pub fn k4() -> Graph {
    complete(4)
}

pub fn complete(n: usize) -> Graph {
    let mut e = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            e.push((u, v));
        }
    }
    graph(&e, n)
}

pub fn triangle() -> Graph {
    graph(&[(0, 1), (1, 2), (2, 0)], 3)
}

pub fn p3() -> Graph {
    graph(&[(0, 1), (1, 2)], 3)
}

/// Two fused six-rings sharing the (4, 5) edge.
pub fn decalin() -> Graph {
    graph(
        &[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 0),
            (4, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (9, 5),
        ],
        10,
    )
}

/// Two five-rings joined by the (0, 5) bridge.
pub fn bicyclopentyl() -> Graph {
    graph(
        &[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 0),
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (9, 5),
            (0, 5),
        ],
        10,
    )
}

/// All-pairs hop distances by boolean matrix powers over u64 bitset rows
/// (graphs up to 64 nodes). `None` = unreachable.
pub fn apsp_matrix_power(g: &Graph) -> Vec<Vec<Option<u32>>> {
    let n = g.node_count();
    assert!(n <= 64, "bitset oracle holds 64 nodes at most");
    let adj: Vec<u64> = (0..n as NodeId)
        .map(|v| {
            g.neighbors(v)
                .iter()
                .fold(0u64, |acc, &u| acc | (1u64 << u))
        })
        .collect();
    let mut dist = vec![vec![None; n]; n];
    let mut reach: Vec<u64> = (0..n).map(|v| 1u64 << v).collect();
    for (v, row) in dist.iter_mut().enumerate() {
        row[v] = Some(0);
    }
    for step in 1..=n as u32 {
        let mut changed = false;
        for v in 0..n {
            // One boolean matrix-vector product: reach(v) row times A.
            let mut next = reach[v];
            let mut bits = reach[v];
            while bits != 0 {
                let w = bits.trailing_zeros() as usize;
                next |= adj[w];
                bits &= bits - 1;
            }
            let new_bits = next & !reach[v];
            if new_bits != 0 {
                changed = true;
                let mut nb = new_bits;
                while nb != 0 {
                    let u = nb.trailing_zeros() as usize;
                    dist[v][u] = Some(step);
                    nb &= nb - 1;
                }
                reach[v] = next;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Direct translation of the attention equations over the full n×n logit
/// matrix, with logits of pairs outside `R(v) = N_k(v) ∪ S` replaced by
/// -1e9. Membership and buckets come from the matrix-power distances, not
/// from the receptive-field builder.
pub fn dense_masked_attention(
    g: &Graph,
    s: &AnchorSet,
    cfg: &EncodingConfig,
    h: &NodeFeatures,
    params: &AttentionLayerParams,
) -> NodeFeatures {
    let n = g.node_count();
    let dist = apsp_matrix_power(g);
    let (heads, dh, dm) = (params.heads(), params.d_head(), params.d_model());
    let inv_sqrt_d = 1.0 / (dh as f64).sqrt();
    let mut out = Array2::<f64>::zeros((n, dm));
    for head in 0..heads {
        let q = h.dot(&params.p_q(head));
        let k = h.dot(&params.p_k(head));
        let v = h.dot(&params.p_v(head));
        for row in 0..n {
            let mut logits = vec![0.0f64; n];
            for col in 0..n {
                let d = dist[row][col];
                let in_rf = d.map_or(false, |d| d <= cfg.k()) || s.contains(col as NodeId);
                logits[col] = if in_rf {
                    let dot = q.row(row).dot(&k.row(col));
                    dot * inv_sqrt_d + params.bias().get(head, cfg.bucket_for(d).code())
                } else {
                    MASK_LOGIT
                };
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                denom += *l;
            }
            for col in 0..n {
                let alpha = logits[col] / denom;
                for t in 0..dh {
                    out[[row, head * dh + t]] += alpha * v[[col, t]];
                }
            }
        }
    }
    out
}

/// Neighborhood-mean GNN layer: the open (`N(v)`) or closed (`{v} ∪ N(v)`)
/// mean of the neighbor rows; with the open convention, isolated nodes
/// keep their own row.
pub fn gnn_mean(g: &Graph, h: &NodeFeatures, include_self: bool) -> NodeFeatures {
    let n = g.node_count();
    let mut out = Array2::<f64>::zeros(h.dim());
    for v in 0..n as NodeId {
        let mut members: Vec<NodeId> = g.neighbors(v).to_vec();
        if include_self || members.is_empty() {
            members.push(v);
        }
        let scale = 1.0 / members.len() as f64;
        for &u in &members {
            for c in 0..h.ncols() {
                out[[v as usize, c]] += h[[u as usize, c]] * scale;
            }
        }
    }
    out
}

/// Does every ordered pair (v, w) have a path of length ≤ 2 in the
/// directed attention graph {v -> u : u ∈ R(v)}? Brute force on bitsets.
pub fn two_step_global(rf: &anchor_attention::attention::ReceptiveField) -> bool {
    let n = rf.node_count();
    assert!(n <= 64);
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let rows: Vec<u64> = (0..n as NodeId)
        .map(|v| {
            rf.row(v)
                .0
                .iter()
                .fold(0u64, |acc, &u| acc | (1u64 << u))
        })
        .collect();
    (0..n).all(|v| {
        let mut within_two = rows[v];
        let mut bits = rows[v];
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            within_two |= rows[u];
            bits &= bits - 1;
        }
        within_two == full
    })
}

/// Every anchor set `select_anchors` could produce on `g` for this k,
/// enumerated by branching over all max-degree tie-break choices.
/// Exponential; for tiny graphs only.
pub fn all_greedy_outcomes(g: &Graph, k: u32) -> Vec<Vec<NodeId>> {
    fn recurse(
        g: &Graph,
        k: u32,
        labeled: &mut Vec<bool>,
        left: usize,
        chosen: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if left == 0 {
            let mut sorted = chosen.clone();
            sorted.sort_unstable();
            if !out.contains(&sorted) {
                out.push(sorted);
            }
            return;
        }
        let best = (0..g.node_count() as NodeId)
            .filter(|&v| labeled[v as usize])
            .map(|v| g.degree(v))
            .max()
            .unwrap();
        let candidates: Vec<NodeId> = (0..g.node_count() as NodeId)
            .filter(|&v| labeled[v as usize] && g.degree(v) == best)
            .collect();
        for a in candidates {
            let ball = anchor_attention::graph::k_hop(g, a, k).unwrap();
            let flipped: Vec<NodeId> = ball
                .iter()
                .copied()
                .filter(|&u| labeled[u as usize])
                .collect();
            for &u in &flipped {
                labeled[u as usize] = false;
            }
            chosen.push(a);
            recurse(g, k, labeled, left - flipped.len(), chosen, out);
            chosen.pop();
            for &u in &flipped {
                labeled[u as usize] = true;
            }
        }
    }
    let mut labeled = vec![true; g.node_count()];
    let mut out = Vec::new();
    recurse(
        g,
        k,
        &mut labeled,
        g.node_count(),
        &mut Vec::new(),
        &mut out,
    );
    out
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Deterministic seeded permutation of `0..n` (Fisher-Yates).
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}
