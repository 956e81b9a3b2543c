//! Central finite-difference validation of the analytic backward passes.
//!
//! Uses only the forward maps: the loss is a fixed random probe contracted
//! with the output, every scalar is perturbed by ±1e-5, and the numeric
//! slope is compared against the analytic gradient. Relative error uses a
//! small denominator floor so true-zero gradients do not amplify finite-
//! difference noise.

use ndarray::Array2;

use crate::error::Result;

use super::layer::{AttentionKind, TransformerLayer};
use super::rf::ReceptiveField;
use super::sparse::{
    attention_backward, attention_forward, random_features, AttentionLayerParams, NodeFeatures,
};

pub const FD_STEP: f64 = 1e-5;

/// Worst relative error per tensor, plus the overall maximum.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    fn from_entries(per_tensor: Vec<(String, f64)>) -> Self {
        let max_rel_error = per_tensor
            .iter()
            .map(|(_, e)| *e)
            .fold(0.0f64, f64::max);
        GradCheckReport {
            per_tensor,
            max_rel_error,
        }
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn probe(n: usize, d: usize, seed: u64) -> Array2<f64> {
    random_features(n, d, seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Check the attention backward against finite differences on every
/// parameter tensor and the input features.
pub fn check_attention(
    h: &NodeFeatures,
    rf: &ReceptiveField,
    params: &AttentionLayerParams,
    probe_seed: u64,
) -> Result<GradCheckReport> {
    let w = probe(h.nrows(), params.d_model(), probe_seed);
    let loss = |h: &NodeFeatures, p: &AttentionLayerParams| -> Result<f64> {
        let (out, _) = attention_forward(h, rf, p)?;
        Ok((&out * &w).sum())
    };
    let (_, acts) = attention_forward(h, rf, params)?;
    let grads = attention_backward(&w, rf, params, &acts)?;

    let mut entries = Vec::new();

    let mut worst_input = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let mut hp = h.clone();
            hp[[i, j]] += FD_STEP;
            let up = loss(&hp, params)?;
            hp[[i, j]] -= 2.0 * FD_STEP;
            let down = loss(&hp, params)?;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst_input = worst_input.max(rel_err(grads.d_input[[i, j]], numeric));
        }
    }
    entries.push(("input".to_string(), worst_input));

    for head in 0..params.heads() {
        for (name, which) in [("p_q", 0usize), ("p_k", 1), ("p_v", 2)] {
            let dims = params.p_q(head).dim();
            let mut worst = 0.0f64;
            for i in 0..dims.0 {
                for j in 0..dims.1 {
                    let mut pp = params.clone();
                    {
                        let m = match which {
                            0 => pp.p_q_mut(head),
                            1 => pp.p_k_mut(head),
                            _ => pp.p_v_mut(head),
                        };
                        m[[i, j]] += FD_STEP;
                    }
                    let up = loss(h, &pp)?;
                    {
                        let m = match which {
                            0 => pp.p_q_mut(head),
                            1 => pp.p_k_mut(head),
                            _ => pp.p_v_mut(head),
                        };
                        m[[i, j]] -= 2.0 * FD_STEP;
                    }
                    let down = loss(h, &pp)?;
                    let numeric = (up - down) / (2.0 * FD_STEP);
                    let analytic = match which {
                        0 => grads.d_p_q[head][[i, j]],
                        1 => grads.d_p_k[head][[i, j]],
                        _ => grads.d_p_v[head][[i, j]],
                    };
                    worst = worst.max(rel_err(analytic, numeric));
                }
            }
            entries.push((format!("{name}[{head}]"), worst));
        }
        let mut worst = 0.0f64;
        for code in 0..params.bias().bucket_count() {
            let mut pp = params.clone();
            let base = pp.bias().get(head, code);
            pp.bias_mut().set(head, code, base + FD_STEP);
            let up = loss(h, &pp)?;
            pp.bias_mut().set(head, code, base - FD_STEP);
            let down = loss(h, &pp)?;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads.d_bias[head][code], numeric));
        }
        entries.push((format!("bias[{head}]"), worst));
    }

    Ok(GradCheckReport::from_entries(entries))
}

/// Check the full pre-norm layer backward the same way, covering the
/// attention tensors plus output projection, both layer norms, and the FFN.
pub fn check_transformer_layer(
    h: &NodeFeatures,
    rf: &ReceptiveField,
    layer: &TransformerLayer,
    probe_seed: u64,
) -> Result<GradCheckReport> {
    let w = probe(h.nrows(), layer.d_model(), probe_seed);
    let loss = |h: &NodeFeatures, l: &TransformerLayer| -> Result<f64> {
        let (out, _) = l.forward(h, AttentionKind::Sparse(rf))?;
        Ok((&out * &w).sum())
    };
    let (_, acts) = layer.forward(h, AttentionKind::Sparse(rf))?;
    let grads = layer.backward(&w, AttentionKind::Sparse(rf), &acts)?;

    let mut entries = Vec::new();

    let mut worst_input = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let mut hp = h.clone();
            hp[[i, j]] += FD_STEP;
            let up = loss(&hp, layer)?;
            hp[[i, j]] -= 2.0 * FD_STEP;
            let down = loss(&hp, layer)?;
            worst_input = worst_input.max(rel_err(
                grads.d_input[[i, j]],
                (up - down) / (2.0 * FD_STEP),
            ));
        }
    }
    entries.push(("input".to_string(), worst_input));

    // Mutators paired with the matching analytic gradient lookup.
    type Mutate = Box<dyn Fn(&mut TransformerLayer, usize, f64)>;
    type Analytic = Box<dyn Fn(&crate::attention::layer::LayerGradients, usize) -> f64>;
    let mut tensors: Vec<(String, usize, Mutate, Analytic)> = Vec::new();
    let d = layer.d_model();
    for head in 0..layer.attn.heads() {
        let dims = layer.attn.p_q(head).dim();
        let len = dims.0 * dims.1;
        let cols = dims.1;
        for (name, which) in [("p_q", 0usize), ("p_k", 1), ("p_v", 2)] {
            tensors.push((
                format!("{name}[{head}]"),
                len,
                Box::new(move |l: &mut TransformerLayer, idx: usize, dx: f64| {
                    let m = match which {
                        0 => l.attn.p_q_mut(head),
                        1 => l.attn.p_k_mut(head),
                        _ => l.attn.p_v_mut(head),
                    };
                    m[[idx / cols, idx % cols]] += dx;
                }),
                Box::new(move |g, idx| {
                    let m = match which {
                        0 => &g.attn.d_p_q[head],
                        1 => &g.attn.d_p_k[head],
                        _ => &g.attn.d_p_v[head],
                    };
                    m[[idx / cols, idx % cols]]
                }),
            ));
        }
        let buckets = layer.attn.bias().bucket_count();
        tensors.push((
            format!("bias[{head}]"),
            buckets,
            Box::new(move |l: &mut TransformerLayer, idx: usize, dx: f64| {
                let base = l.attn.bias().get(head, idx);
                l.attn.bias_mut().set(head, idx, base + dx);
            }),
            Box::new(move |g, idx| g.attn.d_bias[head][idx]),
        ));
    }
    tensors.push((
        "w_o".into(),
        d * d,
        Box::new(move |l, idx, dx| l.w_o[[idx / d, idx % d]] += dx),
        Box::new(move |g, idx| g.d_w_o[[idx / d, idx % d]]),
    ));
    tensors.push((
        "ln1.gamma".into(),
        d,
        Box::new(|l, idx, dx| l.ln1.gamma[idx] += dx),
        Box::new(|g, idx| g.d_ln1_gamma[idx]),
    ));
    tensors.push((
        "ln1.beta".into(),
        d,
        Box::new(|l, idx, dx| l.ln1.beta[idx] += dx),
        Box::new(|g, idx| g.d_ln1_beta[idx]),
    ));
    tensors.push((
        "ln2.gamma".into(),
        d,
        Box::new(|l, idx, dx| l.ln2.gamma[idx] += dx),
        Box::new(|g, idx| g.d_ln2_gamma[idx]),
    ));
    tensors.push((
        "ln2.beta".into(),
        d,
        Box::new(|l, idx, dx| l.ln2.beta[idx] += dx),
        Box::new(|g, idx| g.d_ln2_beta[idx]),
    ));
    let hidden = 2 * d;
    tensors.push((
        "ffn.w1".into(),
        d * hidden,
        Box::new(move |l, idx, dx| l.ffn.w1[[idx / hidden, idx % hidden]] += dx),
        Box::new(move |g, idx| g.d_w1[[idx / hidden, idx % hidden]]),
    ));
    tensors.push((
        "ffn.b1".into(),
        hidden,
        Box::new(|l, idx, dx| l.ffn.b1[idx] += dx),
        Box::new(|g, idx| g.d_b1[idx]),
    ));
    tensors.push((
        "ffn.w2".into(),
        hidden * d,
        Box::new(move |l, idx, dx| l.ffn.w2[[idx / d, idx % d]] += dx),
        Box::new(move |g, idx| g.d_w2[[idx / d, idx % d]]),
    ));
    tensors.push((
        "ffn.b2".into(),
        d,
        Box::new(|l, idx, dx| l.ffn.b2[idx] += dx),
        Box::new(|g, idx| g.d_b2[idx]),
    ));

    for (name, len, mutate, analytic) in tensors {
        let mut worst = 0.0f64;
        for idx in 0..len {
            let mut lp = layer.clone();
            mutate(&mut lp, idx, FD_STEP);
            let up = loss(h, &lp)?;
            mutate(&mut lp, idx, -2.0 * FD_STEP);
            let down = loss(h, &lp)?;
            worst = worst.max(rel_err(analytic(&grads, idx), (up - down) / (2.0 * FD_STEP)));
        }
        entries.push((name, worst));
    }

    Ok(GradCheckReport::from_entries(entries))
}
