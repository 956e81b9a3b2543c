//! Executable expressiveness checks.
//!
//! [`wl_refine`] is a standard 1-WL color refinement over a shared palette,
//! the ceiling for message-passing GNNs. [`fact1_construct`] parameterizes
//! one attention layer so it reproduces a neighborhood-mean GNN layer
//! exactly. [`fact2_run`] evaluates the two-layer construction that mixes a
//! node's k-hop mean with the out-of-ball anchor mean; run over anchor
//! selections it separates graph pairs that WL refinement cannot.

use std::collections::HashMap;

use ndarray::Array2;
use serde::Serialize;

use crate::anchor::{select_anchors, verify_dominating, AnchorSet};
use crate::attention::{
    attention_forward, build_receptive_field, AttentionLayerParams, NodeFeatures, MASK_LOGIT,
};
use crate::encoding::{BiasTable, EncodingConfig, EncodingScheme};
use crate::error::{Error, Result};
use crate::graph::{bfs_spd, BfsScratch, Graph, NodeId};

/// Outcome of running 1-WL refinement on a pair of graphs.
#[derive(Debug, Clone, Serialize)]
pub struct WlResult {
    /// Refinement rounds applied before the joint partition stabilized.
    pub rounds: usize,
    /// Stable color histogram per graph, over a palette shared by both.
    pub histograms: [Vec<(u32, usize)>; 2],
    pub distinguishable: bool,
}

/// 1-WL color refinement: colors start as degrees, each round hashes
/// (own color, sorted neighbor-color multiset), and both graphs share one
/// canonical palette so their histograms are directly comparable. Stops at
/// stabilization or `max_rounds`.
pub fn wl_refine(g1: &Graph, g2: &Graph, max_rounds: usize) -> WlResult {
    let (n1, n2) = (g1.node_count(), g2.node_count());

    // Canonical initial palette from degree values.
    let mut degrees: Vec<usize> = (0..n1)
        .map(|v| g1.degree(v as NodeId))
        .chain((0..n2).map(|v| g2.degree(v as NodeId)))
        .collect();
    degrees.sort_unstable();
    degrees.dedup();
    let deg_color = |d: usize| degrees.binary_search(&d).unwrap() as u32;
    let mut c1: Vec<u32> = (0..n1).map(|v| deg_color(g1.degree(v as NodeId))).collect();
    let mut c2: Vec<u32> = (0..n2).map(|v| deg_color(g2.degree(v as NodeId))).collect();
    let mut distinct = degrees.len();

    let mut rounds = 0;
    for _ in 0..max_rounds {
        let sig = |g: &Graph, colors: &[u32], v: usize| -> (u32, Vec<u32>) {
            let mut nb: Vec<u32> = g
                .neighbors(v as NodeId)
                .iter()
                .map(|&u| colors[u as usize])
                .collect();
            nb.sort_unstable();
            (colors[v], nb)
        };
        let s1: Vec<_> = (0..n1).map(|v| sig(g1, &c1, v)).collect();
        let s2: Vec<_> = (0..n2).map(|v| sig(g2, &c2, v)).collect();

        // Canonical relabel: dense ids in sorted-signature order, so colors
        // are independent of node numbering.
        let mut all: Vec<&(u32, Vec<u32>)> = s1.iter().chain(s2.iter()).collect();
        all.sort_unstable();
        all.dedup();
        let palette: HashMap<&(u32, Vec<u32>), u32> = all
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i as u32))
            .collect();
        if all.len() == distinct {
            break; // refinement is stable
        }
        distinct = all.len();
        c1 = s1.iter().map(|s| palette[s]).collect();
        c2 = s2.iter().map(|s| palette[s]).collect();
        rounds += 1;
    }

    let histogram = |colors: &[u32]| -> Vec<(u32, usize)> {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &c in colors {
            *counts.entry(c).or_insert(0) += 1;
        }
        let mut h: Vec<(u32, usize)> = counts.into_iter().collect();
        h.sort_unstable();
        h
    };
    let histograms = [histogram(&c1), histogram(&c2)];
    let distinguishable = histograms[0] != histograms[1];
    WlResult {
        rounds,
        histograms,
        distinguishable,
    }
}

/// Attention parameters that make one layer compute a neighborhood-mean
/// GNN layer, plus which neighborhood convention applies.
#[derive(Debug, Clone)]
pub struct Fact1Construction {
    pub params: AttentionLayerParams,
    /// When the graph has isolated nodes the self bucket stays unmasked
    /// (so their rows are not fully masked) and the layer averages over
    /// closed neighborhoods `{v} ∪ N(v)`; otherwise the self bucket is
    /// masked and the layer averages over open neighborhoods `N(v)`.
    pub includes_self: bool,
}

/// Zero queries/keys, identity values, and a bias table that keeps only
/// SPD bucket 1 (exact edges): the layer reduces to a mean aggregation
/// over neighbors.
pub fn fact1_construct(
    g: &Graph,
    cfg: &EncodingConfig,
    scheme: EncodingScheme,
    d_model: usize,
) -> Result<Fact1Construction> {
    if !scheme.is_neighbor_distinguishable() {
        return Err(Error::NotNeighborDistinguishable);
    }
    let includes_self = g.nodes().any(|v| g.degree(v) == 0);
    let mut bias = BiasTable::zeros(1, cfg);
    for code in 0..bias.bucket_count() {
        bias.set(0, code, MASK_LOGIT);
    }
    bias.set(0, 1, 0.0);
    if includes_self {
        bias.set(0, 0, 0.0);
    }
    let zero = Array2::<f64>::zeros((d_model, d_model));
    let params = AttentionLayerParams::from_parts(
        vec![zero.clone()],
        vec![zero],
        vec![Array2::eye(d_model)],
        bias,
    )?;
    Ok(Fact1Construction {
        params,
        includes_self,
    })
}

/// Logit constants for the two-layer separation construction. The default
/// `(0, ln 2)` satisfies `e^a / e^b = 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct Fact2Config {
    pub a: f64,
    pub b: f64,
    pub k: u32,
}

impl Default for Fact2Config {
    fn default() -> Self {
        Fact2Config {
            a: 0.0,
            b: std::f64::consts::LN_2,
            k: 1,
        }
    }
}

/// Per-node outputs of the construction plus graph-level readouts.
#[derive(Debug, Clone, Serialize)]
pub struct Fact2Output {
    pub node_values: Vec<f64>,
    /// The in-ball mixing weight p per node; 1 exactly when no anchor lies
    /// outside the ball.
    pub mixing: Vec<f64>,
    pub mean_readout: f64,
    pub sum_readout: f64,
}

/// Closed-form evaluation of the two-layer construction.
///
/// Layer one assigns every node its degree (a SUM-aggregation GNN output);
/// layer two computes
/// `p · MEAN{h_u : u ∈ N_k(v)} + (1 − p) · MEAN{h_a : a ∈ S \ N_k(v)}`
/// with `p = |N_k(v)|e^a / (|N_k(v)|e^a + |S̃|e^b)` — exactly what the
/// attention layer produces with bias `a` on codes ≤ k and `b` on anchor
/// codes > k (cross-checked against [`fact2_via_attention`]).
pub fn fact2_run(g: &Graph, s: &AnchorSet, cfg: &Fact2Config) -> Result<Fact2Output> {
    if s.k() != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "anchor set was built for k = {} but config says k = {}",
            s.k(),
            cfg.k
        )));
    }
    if let Some(witness) = verify_dominating(g, s).witness() {
        return Err(Error::NotDominating {
            k: s.k(),
            witness,
        });
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let degrees: Vec<f64> = g.nodes().map(|v| g.degree(v) as f64).collect();
    let (ea, eb) = (cfg.a.exp(), cfg.b.exp());

    let mut scratch = BfsScratch::new(n);
    let mut ball: Vec<(NodeId, u32)> = Vec::new();
    let mut node_values = Vec::with_capacity(n);
    let mut mixing = Vec::with_capacity(n);
    for v in g.nodes() {
        ball.clear();
        scratch.ball(g, v, cfg.k, &mut ball);
        let ball_len = ball.len() as f64;
        let ball_mean = ball.iter().map(|&(u, _)| degrees[u as usize]).sum::<f64>() / ball_len;
        let mut ball_ids: Vec<NodeId> = ball.iter().map(|&(u, _)| u).collect();
        ball_ids.sort_unstable();
        let outside: Vec<NodeId> = s
            .nodes()
            .iter()
            .copied()
            .filter(|a| ball_ids.binary_search(a).is_err())
            .collect();
        let (p, value) = if outside.is_empty() {
            (1.0, ball_mean)
        } else {
            let outside_mean = outside
                .iter()
                .map(|&a| degrees[a as usize])
                .sum::<f64>()
                / outside.len() as f64;
            let denom = ball_len * ea + outside.len() as f64 * eb;
            let p = ball_len * ea / denom;
            (p, p * ball_mean + (1.0 - p) * outside_mean)
        };
        node_values.push(value);
        mixing.push(p);
    }
    let sum_readout: f64 = node_values.iter().sum();
    Ok(Fact2Output {
        mean_readout: sum_readout / n as f64,
        sum_readout,
        node_values,
        mixing,
    })
}

/// The same construction executed through the real attention module:
/// degree features, zero Q/K, identity V, bias `a` on codes ≤ k and `b`
/// above. Returns per-node values.
pub fn fact2_via_attention(g: &Graph, s: &AnchorSet, cfg: &Fact2Config) -> Result<Vec<f64>> {
    if s.k() != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "anchor set was built for k = {} but config says k = {}",
            s.k(),
            cfg.k
        )));
    }
    let enc = EncodingConfig::for_k(cfg.k)?;
    let scheme = EncodingScheme::Spd { d_max: enc.d_max() };
    if !scheme.is_neighbor_distinguishable() {
        return Err(Error::NotNeighborDistinguishable);
    }
    if !scheme.is_anchor_distinguishable(cfg.k) {
        return Err(Error::NotAnchorDistinguishable { k: cfg.k });
    }
    let rf = build_receptive_field(g, s, enc.d_max())?;
    let mut bias = BiasTable::zeros(1, &enc);
    for code in 0..bias.bucket_count() {
        let value = if code as u32 <= cfg.k { cfg.a } else { cfg.b };
        bias.set(0, code, value);
    }
    let params = AttentionLayerParams::from_parts(
        vec![Array2::zeros((1, 1))],
        vec![Array2::zeros((1, 1))],
        vec![Array2::eye(1)],
        bias,
    )?;
    let h: NodeFeatures =
        Array2::from_shape_fn((g.node_count(), 1), |(v, _)| g.degree(v as NodeId) as f64);
    let (out, _) = attention_forward(&h, &rf, &params)?;
    Ok(out.column(0).to_vec())
}

/// Readout multisets of the construction over anchor selections, and
/// whether they separate the two graphs.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    /// Sorted mean-readout multisets, one per graph.
    pub multisets: [Vec<f64>; 2],
    /// Max pairwise gap between the sorted multisets, or infinity when
    /// their sizes differ.
    pub separation: f64,
    pub distinguished: bool,
}

const MULTISET_TOL: f64 = 1e-9;

fn report_from_multisets(mut m1: Vec<f64>, mut m2: Vec<f64>) -> DistributionReport {
    m1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    m2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let separation = if m1.len() == m2.len() {
        m1.iter()
            .zip(m2.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    } else {
        f64::INFINITY
    };
    DistributionReport {
        multisets: [m1, m2],
        distinguished: separation > MULTISET_TOL,
        separation,
    }
}

/// Empirical readout distributions over `trials` seeded greedy anchor
/// selections per graph (the same selection seeds are used for both, so
/// identical graphs get identical distributions).
pub fn fact2_distribution(
    g1: &Graph,
    g2: &Graph,
    cfg: &Fact2Config,
    trials: usize,
    seed: u64,
) -> Result<DistributionReport> {
    let run = |g: &Graph| -> Result<Vec<f64>> {
        (0..trials)
            .map(|t| {
                let s = select_anchors(g, cfg.k, seed.wrapping_add(t as u64));
                Ok(fact2_run(g, &s, cfg)?.mean_readout)
            })
            .collect()
    };
    Ok(report_from_multisets(run(g1)?, run(g2)?))
}

/// Readout distributions over every minimum-cardinality k-dominating set
/// of each graph (exhaustive; graphs must be small).
pub fn fact2_distribution_exhaustive(
    g1: &Graph,
    g2: &Graph,
    cfg: &Fact2Config,
) -> Result<DistributionReport> {
    let run = |g: &Graph| -> Result<Vec<f64>> {
        enumerate_minimum_dominating_sets(g, cfg.k)?
            .into_iter()
            .map(|set| {
                let s = AnchorSet::from_nodes(g.node_count(), set, cfg.k, 0)?;
                Ok(fact2_run(g, &s, cfg)?.mean_readout)
            })
            .collect()
    };
    Ok(report_from_multisets(run(g1)?, run(g2)?))
}

/// All k-dominating sets of minimum cardinality, by brute force over
/// subsets. Rejects graphs with more than 16 nodes.
pub fn enumerate_minimum_dominating_sets(g: &Graph, k: u32) -> Result<Vec<Vec<NodeId>>> {
    let n = g.node_count();
    if n > 16 {
        return Err(Error::Degenerate(format!(
            "brute-force dominating-set enumeration is limited to 16 nodes, got {n}"
        )));
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    // Coverage mask per candidate anchor: the nodes its k-ball reaches.
    let mut cover = vec![0u32; n];
    for v in g.nodes() {
        let spd = bfs_spd(g, v, Some(k))?;
        for u in g.nodes() {
            if spd.distance(u).is_some() {
                cover[v as usize] |= 1 << u;
            }
        }
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    for size in 1..=n {
        let mut found = Vec::new();
        // Gosper's hack: iterate all n-bit masks with `size` bits set.
        let mut mask: u32 = (1 << size) - 1;
        while mask < (1u32 << n) {
            let mut covered = 0u32;
            let mut bits = mask;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                covered |= cover[v];
                bits &= bits - 1;
            }
            if covered == full {
                found.push((0..n as NodeId).filter(|&v| mask >> v & 1 == 1).collect());
            }
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
        if !found.is_empty() {
            return Ok(found);
        }
    }
    unreachable!("the full node set always dominates");
}
