//! Pre-norm transformer layer around the attention kernel, plus the mean
//! readout. Forward and backward are hand-derived; the FFN nonlinearity is
//! SiLU so numeric gradient checks stay clean.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};

use super::dense::{dense_attention_backward, dense_attention_forward, DenseActivations};
use super::rf::ReceptiveField;
use super::sparse::{
    attention_backward, attention_forward, AttentionActivations, AttentionGradients,
    AttentionLayerParams, NodeFeatures,
};

/// Which attention kernel a layer runs on.
#[derive(Clone, Copy)]
pub enum AttentionKind<'a> {
    Sparse(&'a ReceptiveField),
    Dense,
}

/// Attention activations saved by either kernel.
#[derive(Debug, Clone)]
pub enum SavedAttention {
    Sparse(AttentionActivations),
    Dense(DenseActivations),
}

impl SavedAttention {
    pub fn bytes(&self) -> u64 {
        match self {
            SavedAttention::Sparse(a) => a.bytes(),
            SavedAttention::Dense(a) => a.bytes(),
        }
    }
}

/// Row-wise layer normalization with learnable scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormSaved {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn identity(d: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
            eps: 1e-5,
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormSaved) {
        let d = x.ncols() as f64;
        let mut xhat = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            *is = 1.0 / (var + self.eps).sqrt();
            row.mapv_inplace(|v| v * *is);
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, LayerNormSaved { xhat, inv_std })
    }

    /// Returns `d_x`; accumulates parameter gradients into the given slots.
    fn backward(
        &self,
        upstream: &Array2<f64>,
        saved: &LayerNormSaved,
        d_gamma: &mut Array1<f64>,
        d_beta: &mut Array1<f64>,
    ) -> Array2<f64> {
        let d = upstream.ncols() as f64;
        *d_gamma += &(upstream * &saved.xhat).sum_axis(Axis(0));
        *d_beta += &upstream.sum_axis(Axis(0));
        let mut dx = upstream * &self.gamma; // d xhat
        for ((mut row, xhat_row), &is) in dx
            .rows_mut()
            .into_iter()
            .zip(saved.xhat.rows())
            .zip(saved.inv_std.iter())
        {
            let m1 = row.sum() / d;
            let m2 = row
                .iter()
                .zip(xhat_row.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / d;
            for (v, &xh) in row.iter_mut().zip(xhat_row.iter()) {
                *v = is * (*v - m1 - xh * m2);
            }
        }
        dx
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Two dense layers with a SiLU in between; hidden width is 2 × d_model.
#[derive(Debug, Clone)]
pub struct Ffn {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct FfnSaved {
    x: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
}

impl Ffn {
    pub fn new_random(d_model: usize, seed: u64) -> Self {
        let hidden = 2 * d_model;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = 1.0 / (d_model as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        Ffn {
            w1: Array2::from_shape_fn((d_model, hidden), |_| rng.gen_range(-s1..s1)),
            b1: Array1::zeros(hidden),
            w2: Array2::from_shape_fn((hidden, d_model), |_| rng.gen_range(-s2..s2)),
            b2: Array1::zeros(d_model),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, FfnSaved) {
        let z1 = x.dot(&self.w1) + &self.b1;
        let a1 = z1.mapv(silu);
        let y = a1.dot(&self.w2) + &self.b2;
        (
            y,
            FfnSaved {
                x: x.clone(),
                z1,
                a1,
            },
        )
    }

    fn backward(&self, upstream: &Array2<f64>, saved: &FfnSaved) -> FfnGradients {
        let d_w2 = saved.a1.t().dot(upstream);
        let d_b2 = upstream.sum_axis(Axis(0));
        let d_a1 = upstream.dot(&self.w2.t());
        let d_z1 = &d_a1 * &saved.z1.mapv(silu_prime);
        let d_w1 = saved.x.t().dot(&d_z1);
        let d_b1 = d_z1.sum_axis(Axis(0));
        let d_x = d_z1.dot(&self.w1.t());
        FfnGradients {
            d_x,
            d_w1,
            d_b1,
            d_w2,
            d_b2,
        }
    }
}

struct FfnGradients {
    d_x: Array2<f64>,
    d_w1: Array2<f64>,
    d_b1: Array1<f64>,
    d_w2: Array2<f64>,
    d_b2: Array1<f64>,
}

/// One pre-norm residual block: `h + W_O·Attn(LN(h))`, then `+ FFN(LN(·))`.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub attn: AttentionLayerParams,
    pub w_o: Array2<f64>,
    pub ln1: LayerNorm,
    pub ln2: LayerNorm,
    pub ffn: Ffn,
}

#[derive(Debug, Clone)]
pub struct LayerActivations {
    ln1: LayerNormSaved,
    attn: SavedAttention,
    attn_out: Array2<f64>,
    ln2: LayerNormSaved,
    ffn: FfnSaved,
}

impl LayerActivations {
    pub fn bytes(&self) -> u64 {
        let ln = (self.ln1.xhat.len() + self.ln2.xhat.len()) * 8
            + (self.ln1.inv_std.len() + self.ln2.inv_std.len()) * 8;
        let ffn = (self.ffn.x.len() + self.ffn.z1.len() + self.ffn.a1.len()) * 8;
        self.attn.bytes() + (ln + ffn + self.attn_out.len() * 8) as u64
    }
}

/// All gradients of one layer for a given upstream gradient.
#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub d_input: NodeFeatures,
    pub attn: AttentionGradients,
    pub d_w_o: Array2<f64>,
    pub d_ln1_gamma: Array1<f64>,
    pub d_ln1_beta: Array1<f64>,
    pub d_ln2_gamma: Array1<f64>,
    pub d_ln2_beta: Array1<f64>,
    pub d_w1: Array2<f64>,
    pub d_b1: Array1<f64>,
    pub d_w2: Array2<f64>,
    pub d_b2: Array1<f64>,
}

impl LayerGradients {
    pub fn bytes(&self) -> u64 {
        let mats = (self.d_input.len()
            + self.d_w_o.len()
            + self.d_w1.len()
            + self.d_w2.len()) as u64;
        let vecs = (self.d_ln1_gamma.len()
            + self.d_ln1_beta.len()
            + self.d_ln2_gamma.len()
            + self.d_ln2_beta.len()
            + self.d_b1.len()
            + self.d_b2.len()) as u64;
        8 * (mats + vecs) + self.attn.bytes()
    }
}

impl TransformerLayer {
    pub fn new_random(d_model: usize, heads: usize, cfg: &EncodingConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (d_model as f64).sqrt();
        TransformerLayer {
            attn: AttentionLayerParams::new_random(d_model, heads, cfg, seed.wrapping_add(1)),
            w_o: Array2::from_shape_fn((d_model, d_model), |_| rng.gen_range(-s..s)),
            ln1: LayerNorm::identity(d_model),
            ln2: LayerNorm::identity(d_model),
            ffn: Ffn::new_random(d_model, seed.wrapping_add(2)),
        }
    }

    pub fn d_model(&self) -> usize {
        self.attn.d_model()
    }

    pub fn forward(
        &self,
        h: &NodeFeatures,
        kind: AttentionKind<'_>,
    ) -> Result<(NodeFeatures, LayerActivations)> {
        let (x1, ln1_saved) = self.ln1.forward(h);
        let (attn_out, attn_saved) = match kind {
            AttentionKind::Sparse(rf) => {
                let (o, a) = attention_forward(&x1, rf, &self.attn)?;
                (o, SavedAttention::Sparse(a))
            }
            AttentionKind::Dense => {
                let (o, a) = dense_attention_forward(&x1, &self.attn)?;
                (o, SavedAttention::Dense(a))
            }
        };
        let r1 = h + &attn_out.dot(&self.w_o);
        let (x2, ln2_saved) = self.ln2.forward(&r1);
        let (f, ffn_saved) = self.ffn.forward(&x2);
        let out = &r1 + &f;
        Ok((
            out,
            LayerActivations {
                ln1: ln1_saved,
                attn: attn_saved,
                attn_out,
                ln2: ln2_saved,
                ffn: ffn_saved,
            },
        ))
    }

    pub fn backward(
        &self,
        upstream: &NodeFeatures,
        kind: AttentionKind<'_>,
        acts: &LayerActivations,
    ) -> Result<LayerGradients> {
        let d = self.d_model();
        let mut d_ln1_gamma = Array1::zeros(d);
        let mut d_ln1_beta = Array1::zeros(d);
        let mut d_ln2_gamma = Array1::zeros(d);
        let mut d_ln2_beta = Array1::zeros(d);

        let ffn_grads = self.ffn.backward(upstream, &acts.ffn);
        let d_r1 = upstream
            + &self
                .ln2
                .backward(&ffn_grads.d_x, &acts.ln2, &mut d_ln2_gamma, &mut d_ln2_beta);

        let d_attn_out = d_r1.dot(&self.w_o.t());
        let d_w_o = acts.attn_out.t().dot(&d_r1);
        let attn_grads = match (kind, &acts.attn) {
            (AttentionKind::Sparse(rf), SavedAttention::Sparse(a)) => {
                attention_backward(&d_attn_out, rf, &self.attn, a)?
            }
            (AttentionKind::Dense, SavedAttention::Dense(a)) => {
                dense_attention_backward(&d_attn_out, &self.attn, a)?
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "attention kind does not match saved activations".into(),
                ))
            }
        };
        let d_input = &d_r1
            + &self.ln1.backward(
                &attn_grads.d_input,
                &acts.ln1,
                &mut d_ln1_gamma,
                &mut d_ln1_beta,
            );

        Ok(LayerGradients {
            d_input,
            attn: attn_grads,
            d_w_o,
            d_ln1_gamma,
            d_ln1_beta,
            d_ln2_gamma,
            d_ln2_beta,
            d_w1: ffn_grads.d_w1,
            d_b1: ffn_grads.d_b1,
            d_w2: ffn_grads.d_w2,
            d_b2: ffn_grads.d_b2,
        })
    }

    pub fn param_bytes(&self) -> u64 {
        self.attn.bytes()
            + 8 * (self.w_o.len()
                + self.ln1.gamma.len() * 2
                + self.ln2.gamma.len() * 2
                + self.ffn.w1.len()
                + self.ffn.b1.len()
                + self.ffn.w2.len()
                + self.ffn.b2.len()) as u64
    }
}

/// Forward-only convenience wrapper for a single sparse layer.
pub fn transformer_layer(
    h: &NodeFeatures,
    rf: &ReceptiveField,
    layer: &TransformerLayer,
) -> Result<NodeFeatures> {
    Ok(layer.forward(h, AttentionKind::Sparse(rf))?.0)
}

/// Stacked layers sharing one attention kind.
#[derive(Debug, Clone)]
pub struct TransformerStack {
    pub layers: Vec<TransformerLayer>,
}

impl TransformerStack {
    pub fn new_random(
        d_model: usize,
        heads: usize,
        depth: usize,
        cfg: &EncodingConfig,
        seed: u64,
    ) -> Self {
        TransformerStack {
            layers: (0..depth)
                .map(|i| {
                    TransformerLayer::new_random(
                        d_model,
                        heads,
                        cfg,
                        seed.wrapping_add(1000 * i as u64),
                    )
                })
                .collect(),
        }
    }

    pub fn forward(
        &self,
        h: &NodeFeatures,
        kind: AttentionKind<'_>,
    ) -> Result<(NodeFeatures, Vec<LayerActivations>)> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut x = h.clone();
        for layer in &self.layers {
            let (y, a) = layer.forward(&x, kind)?;
            acts.push(a);
            x = y;
        }
        Ok((x, acts))
    }

    /// Back-propagate through the whole stack; returns the input gradient
    /// and per-layer gradients (front to back, matching `layers`).
    pub fn backward(
        &self,
        upstream: &NodeFeatures,
        kind: AttentionKind<'_>,
        acts: &[LayerActivations],
    ) -> Result<(NodeFeatures, Vec<LayerGradients>)> {
        if acts.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(
                "activation list does not match stack depth".into(),
            ));
        }
        let mut grads: Vec<LayerGradients> = Vec::with_capacity(self.layers.len());
        let mut up = upstream.clone();
        for (layer, a) in self.layers.iter().zip(acts.iter()).rev() {
            let g = layer.backward(&up, kind, a)?;
            up = g.d_input.clone();
            grads.push(g);
        }
        grads.reverse();
        Ok((up, grads))
    }

    pub fn param_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.param_bytes()).sum()
    }
}

/// Column mean over nodes: the graph-level readout.
pub fn mean_readout(h: &NodeFeatures) -> Result<Array1<f64>> {
    if h.nrows() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(h.sum_axis(Axis(0)) / h.nrows() as f64)
}
