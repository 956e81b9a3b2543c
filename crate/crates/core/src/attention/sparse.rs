//! Sparse multi-head attention over receptive-field rows.
//!
//! Per head h and node v: `q_v = P_Q h_v`, and for `u ∈ R(v)` only,
//! logits `q_v·k_u/√d + F(SE(v,u))` go through a max-subtracted softmax;
//! the output is the α-weighted sum of value vectors, heads concatenated.
//! The backward pass is the exact analytic differentiation of that map,
//! with the softmax Jacobian applied row-wise and bias gradients
//! accumulated per bucket code. All loops run in a fixed order so results
//! are bit-reproducible.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{BiasTable, EncodingConfig};
use crate::error::{Error, Result};
use crate::graph::NodeId;

use super::rf::ReceptiveField;

/// Node feature matrix, one row per node.
pub type NodeFeatures = Array2<f64>;

/// Finite stand-in for -inf when masking logits: underflows to exactly 0
/// after a max-subtracted softmax in 64-bit without producing NaN.
pub const MASK_LOGIT: f64 = -1.0e9;

/// Per-head projections plus the structural-bias table.
#[derive(Debug, Clone)]
pub struct AttentionLayerParams {
    d_model: usize,
    heads: usize,
    d_head: usize,
    p_q: Vec<Array2<f64>>,
    p_k: Vec<Array2<f64>>,
    p_v: Vec<Array2<f64>>,
    bias: BiasTable,
}

impl AttentionLayerParams {
    /// Assemble from explicit per-head `(d_model × d_head)` matrices.
    pub fn from_parts(
        p_q: Vec<Array2<f64>>,
        p_k: Vec<Array2<f64>>,
        p_v: Vec<Array2<f64>>,
        bias: BiasTable,
    ) -> Result<Self> {
        let heads = p_q.len();
        if heads == 0 || p_k.len() != heads || p_v.len() != heads || bias.heads() != heads {
            return Err(Error::ShapeMismatch(
                "projection lists and bias table must agree on head count".into(),
            ));
        }
        let (d_model, d_head) = p_q[0].dim();
        for m in p_q.iter().chain(&p_k).chain(&p_v) {
            if m.dim() != (d_model, d_head) {
                return Err(Error::ShapeMismatch(format!(
                    "expected projection shape ({d_model}, {d_head}), got {:?}",
                    m.dim()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("projection matrix"));
            }
        }
        bias.validate()?;
        Ok(AttentionLayerParams {
            d_model,
            heads,
            d_head,
            p_q,
            p_k,
            p_v,
            bias,
        })
    }

    /// Random projections (uniform, 1/√d_model scale) and a zero bias table.
    /// `d_model` must split evenly across heads.
    pub fn new_random(d_model: usize, heads: usize, cfg: &EncodingConfig, seed: u64) -> Self {
        assert!(heads >= 1 && d_model % heads == 0, "d_model must divide by heads");
        let d_head = d_model / heads;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (d_model as f64).sqrt();
        let mats = |rng: &mut ChaCha8Rng| -> Vec<Array2<f64>> {
            (0..heads)
                .map(|_| {
                    Array2::from_shape_fn((d_model, d_head), |_| rng.gen_range(-scale..scale))
                })
                .collect()
        };
        let p_q = mats(&mut rng);
        let p_k = mats(&mut rng);
        let p_v = mats(&mut rng);
        AttentionLayerParams {
            d_model,
            heads,
            d_head,
            p_q,
            p_k,
            p_v,
            bias: BiasTable::zeros(heads, cfg),
        }
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn d_head(&self) -> usize {
        self.d_head
    }

    pub fn bias(&self) -> &BiasTable {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut BiasTable {
        &mut self.bias
    }

    pub fn p_q(&self, head: usize) -> ArrayView2<'_, f64> {
        self.p_q[head].view()
    }

    pub fn p_k(&self, head: usize) -> ArrayView2<'_, f64> {
        self.p_k[head].view()
    }

    pub fn p_v(&self, head: usize) -> ArrayView2<'_, f64> {
        self.p_v[head].view()
    }

    pub fn p_q_mut(&mut self, head: usize) -> &mut Array2<f64> {
        &mut self.p_q[head]
    }

    pub fn p_k_mut(&mut self, head: usize) -> &mut Array2<f64> {
        &mut self.p_k[head]
    }

    pub fn p_v_mut(&mut self, head: usize) -> &mut Array2<f64> {
        &mut self.p_v[head]
    }

    pub fn bytes(&self) -> u64 {
        let per = (self.d_model * self.d_head * 8) as u64;
        3 * per * self.heads as u64 + (self.heads * self.bias.bucket_count() * 8) as u64
    }

    /// Checkpoint form: shapes, row-major float arrays, and the encoding
    /// config the bias table is sized for.
    pub fn to_checkpoint_json(&self, k: u32) -> String {
        let flat = |m: &Vec<Array2<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|a| a.iter().copied().collect()).collect()
        };
        let file = CheckpointFile {
            d_model: self.d_model,
            heads: self.heads,
            d_head: self.d_head,
            encoding: EncodingDims {
                k,
                d_max: self.bias.d_max(),
            },
            p_q: flat(&self.p_q),
            p_k: flat(&self.p_k),
            p_v: flat(&self.p_v),
            bias: (0..self.heads).map(|h| self.bias.row(h).to_vec()).collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(json: &str) -> Result<(Self, EncodingConfig)> {
        let file: CheckpointFile = serde_json::from_str(json)?;
        let cfg = EncodingConfig::new(file.encoding.k, file.encoding.d_max)?;
        let unflat = |rows: Vec<Vec<f64>>| -> Result<Vec<Array2<f64>>> {
            rows.into_iter()
                .map(|r| {
                    Array2::from_shape_vec((file.d_model, file.d_head), r)
                        .map_err(|e| Error::ShapeMismatch(e.to_string()))
                })
                .collect()
        };
        let mut bias = BiasTable::zeros(file.heads, &cfg);
        if file.bias.len() != file.heads {
            return Err(Error::ShapeMismatch("bias rows != heads".into()));
        }
        for (h, row) in file.bias.iter().enumerate() {
            if row.len() != bias.bucket_count() {
                return Err(Error::ShapeMismatch("bias row length".into()));
            }
            for (c, &b) in row.iter().enumerate() {
                bias.set(h, c, b);
            }
        }
        let params = AttentionLayerParams::from_parts(
            unflat(file.p_q)?,
            unflat(file.p_k)?,
            unflat(file.p_v)?,
            bias,
        )?;
        Ok((params, cfg))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    d_model: usize,
    heads: usize,
    d_head: usize,
    encoding: EncodingDims,
    p_q: Vec<Vec<f64>>,
    p_k: Vec<Vec<f64>>,
    p_v: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EncodingDims {
    k: u32,
    d_max: u32,
}

/// Everything the backward pass needs from a forward run.
#[derive(Debug, Clone)]
pub struct AttentionActivations {
    pub(crate) input: NodeFeatures,
    pub(crate) q: Vec<Array2<f64>>,
    pub(crate) k: Vec<Array2<f64>>,
    pub(crate) v: Vec<Array2<f64>>,
    /// One α per attended pair per head, in row order.
    pub(crate) alphas: Vec<Vec<f64>>,
}

impl AttentionActivations {
    /// Stored attention weight for one head at a flat pair index (pairs are
    /// laid out row by row, matching the receptive field).
    pub fn alpha(&self, head: usize, pair_idx: usize) -> f64 {
        self.alphas[head][pair_idx]
    }

    /// Max |Σ_u α_{v,u} − 1| per head.
    pub fn alpha_row_sum_deviation(&self, rf: &ReceptiveField) -> Vec<f64> {
        self.alphas
            .iter()
            .map(|alpha| {
                let mut worst = 0.0f64;
                let mut offset = 0usize;
                for v in 0..rf.node_count() as NodeId {
                    let len = rf.row_len(v);
                    let sum: f64 = alpha[offset..offset + len].iter().sum();
                    worst = worst.max((sum - 1.0).abs());
                    offset += len;
                }
                worst
            })
            .collect()
    }

    pub fn bytes(&self) -> u64 {
        let mats: usize = self
            .q
            .iter()
            .chain(&self.k)
            .chain(&self.v)
            .map(|m| m.len() * 8)
            .sum();
        let alphas: usize = self.alphas.iter().map(|a| a.len() * 8).sum();
        (self.input.len() * 8 + mats + alphas) as u64
    }
}

/// Gradients of the attention map, one entry per parameter tensor plus the
/// input features.
#[derive(Debug, Clone)]
pub struct AttentionGradients {
    pub d_input: NodeFeatures,
    pub d_p_q: Vec<Array2<f64>>,
    pub d_p_k: Vec<Array2<f64>>,
    pub d_p_v: Vec<Array2<f64>>,
    pub d_bias: Vec<Vec<f64>>,
}

impl AttentionGradients {
    pub fn bytes(&self) -> u64 {
        let mats: usize = self
            .d_p_q
            .iter()
            .chain(&self.d_p_k)
            .chain(&self.d_p_v)
            .map(|m| m.len() * 8)
            .sum();
        let bias: usize = self.d_bias.iter().map(|b| b.len() * 8).sum();
        (self.d_input.len() * 8 + mats + bias) as u64
    }
}

/// Sparse attention forward. Returns the concatenated head outputs and the
/// activations needed for [`attention_backward`].
pub fn attention_forward(
    h: &NodeFeatures,
    rf: &ReceptiveField,
    params: &AttentionLayerParams,
) -> Result<(NodeFeatures, AttentionActivations)> {
    check_forward_shapes(h, rf, params)?;
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input features"));
    }
    let n = rf.node_count();
    let (heads, dh, dm) = (params.heads, params.d_head, params.d_model);
    let inv_sqrt_d = 1.0 / (dh as f64).sqrt();

    let mut out = Array2::<f64>::zeros((n, dm));
    let out_s = out.as_slice_mut().expect("standard layout");
    let mut q_all = Vec::with_capacity(heads);
    let mut k_all = Vec::with_capacity(heads);
    let mut v_all = Vec::with_capacity(heads);
    let mut alphas_all = Vec::with_capacity(heads);

    let mut logits: Vec<f64> = Vec::new();
    for head in 0..heads {
        let q = h.dot(&params.p_q[head]);
        let k = h.dot(&params.p_k[head]);
        let v = h.dot(&params.p_v[head]);
        let qs = q.as_slice().expect("standard layout");
        let ks = k.as_slice().expect("standard layout");
        let vs = v.as_slice().expect("standard layout");
        let bias = params.bias.row(head);
        let mut alpha: Vec<f64> = Vec::with_capacity(rf.attended_pairs() as usize);

        for node in 0..n {
            let (cols, codes) = rf.row(node as NodeId);
            let qv = &qs[node * dh..(node + 1) * dh];
            logits.clear();
            let mut max_logit = f64::NEG_INFINITY;
            for (idx, &u) in cols.iter().enumerate() {
                let ku = &ks[u as usize * dh..(u as usize + 1) * dh];
                let mut dot = 0.0;
                for t in 0..dh {
                    dot += qv[t] * ku[t];
                }
                let logit = dot * inv_sqrt_d + bias[codes[idx] as usize];
                max_logit = max_logit.max(logit);
                logits.push(logit);
            }
            let mut denom = 0.0;
            for logit in logits.iter_mut() {
                *logit = (*logit - max_logit).exp();
                denom += *logit;
            }
            let out_row = &mut out_s[node * dm + head * dh..node * dm + (head + 1) * dh];
            for (idx, &u) in cols.iter().enumerate() {
                let a = logits[idx] / denom;
                alpha.push(a);
                let vu = &vs[u as usize * dh..(u as usize + 1) * dh];
                for t in 0..dh {
                    out_row[t] += a * vu[t];
                }
            }
        }
        q_all.push(q);
        k_all.push(k);
        v_all.push(v);
        alphas_all.push(alpha);
    }

    Ok((
        out,
        AttentionActivations {
            input: h.clone(),
            q: q_all,
            k: k_all,
            v: v_all,
            alphas: alphas_all,
        },
    ))
}

/// Exact gradients of [`attention_forward`] for the given upstream
/// gradient: input features, the three projections per head, and the bias
/// table per bucket code.
pub fn attention_backward(
    upstream: &NodeFeatures,
    rf: &ReceptiveField,
    params: &AttentionLayerParams,
    acts: &AttentionActivations,
) -> Result<AttentionGradients> {
    let n = rf.node_count();
    let (heads, dh, dm) = (params.heads, params.d_head, params.d_model);
    if upstream.dim() != (n, dm) {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient is {:?}, expected ({n}, {dm})",
            upstream.dim()
        )));
    }
    if acts.input.dim() != (n, dm) || acts.alphas.len() != heads {
        return Err(Error::ShapeMismatch(
            "activations do not match this receptive field / parameter set".into(),
        ));
    }
    let inv_sqrt_d = 1.0 / (dh as f64).sqrt();
    let up_s = upstream.as_slice().expect("standard layout");

    let mut d_input = Array2::<f64>::zeros((n, dm));
    let mut d_p_q = Vec::with_capacity(heads);
    let mut d_p_k = Vec::with_capacity(heads);
    let mut d_p_v = Vec::with_capacity(heads);
    let mut d_bias = vec![vec![0.0; params.bias.bucket_count()]; heads];

    let mut d_alpha: Vec<f64> = Vec::new();
    for head in 0..heads {
        let qs = acts.q[head].as_slice().expect("standard layout");
        let ks = acts.k[head].as_slice().expect("standard layout");
        let vs = acts.v[head].as_slice().expect("standard layout");
        let alpha = &acts.alphas[head];
        let mut dq = Array2::<f64>::zeros((n, dh));
        let mut dk = Array2::<f64>::zeros((n, dh));
        let mut dv = Array2::<f64>::zeros((n, dh));
        let dqs = dq.as_slice_mut().expect("standard layout");
        let dks = dk.as_slice_mut().expect("standard layout");
        let dvs = dv.as_slice_mut().expect("standard layout");
        let dbias = &mut d_bias[head];
        let mut offset = 0usize;

        for node in 0..n {
            let (cols, codes) = rf.row(node as NodeId);
            let row_len = cols.len();
            let a_row = &alpha[offset..offset + row_len];
            let up_row = &up_s[node * dm + head * dh..node * dm + (head + 1) * dh];
            let qv = &qs[node * dh..(node + 1) * dh];

            // dα, and the softmax Jacobian applied within the row.
            d_alpha.clear();
            let mut weighted_sum = 0.0;
            for (idx, &u) in cols.iter().enumerate() {
                let vu = &vs[u as usize * dh..(u as usize + 1) * dh];
                let mut da = 0.0;
                for t in 0..dh {
                    da += up_row[t] * vu[t];
                }
                d_alpha.push(da);
                weighted_sum += a_row[idx] * da;
            }
            for (idx, &u) in cols.iter().enumerate() {
                let ui = u as usize;
                let a = a_row[idx];
                let dlogit = a * (d_alpha[idx] - weighted_sum);
                dbias[codes[idx] as usize] += dlogit;
                let scaled = dlogit * inv_sqrt_d;
                let ku = &ks[ui * dh..(ui + 1) * dh];
                let dq_row = &mut dqs[node * dh..(node + 1) * dh];
                for t in 0..dh {
                    dq_row[t] += scaled * ku[t];
                }
                let dk_row = &mut dks[ui * dh..(ui + 1) * dh];
                for t in 0..dh {
                    dk_row[t] += scaled * qv[t];
                }
                let dv_row = &mut dvs[ui * dh..(ui + 1) * dh];
                for t in 0..dh {
                    dv_row[t] += a * up_row[t];
                }
            }
            offset += row_len;
        }

        d_p_q.push(acts.input.t().dot(&dq));
        d_p_k.push(acts.input.t().dot(&dk));
        d_p_v.push(acts.input.t().dot(&dv));
        d_input = d_input
            + dq.dot(&params.p_q[head].t())
            + dk.dot(&params.p_k[head].t())
            + dv.dot(&params.p_v[head].t());
    }

    Ok(AttentionGradients {
        d_input,
        d_p_q,
        d_p_k,
        d_p_v,
        d_bias,
    })
}

fn check_forward_shapes(
    h: &NodeFeatures,
    rf: &ReceptiveField,
    params: &AttentionLayerParams,
) -> Result<()> {
    let n = rf.node_count();
    if h.nrows() != n || h.ncols() != params.d_model {
        return Err(Error::ShapeMismatch(format!(
            "features are {:?}, expected ({n}, {})",
            h.dim(),
            params.d_model
        )));
    }
    if params.bias.d_max() != rf.config().d_max() {
        return Err(Error::ShapeMismatch(format!(
            "bias table d_max = {} but receptive field uses d_max = {}",
            params.bias.d_max(),
            rf.config().d_max()
        )));
    }
    Ok(())
}

/// Seeded standard-normal-ish features (uniform in [-1, 1]) for harnesses.
pub fn random_features(n: usize, d_model: usize, seed: u64) -> NodeFeatures {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d_model), |_| rng.gen_range(-1.0..1.0))
}
