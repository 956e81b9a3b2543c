//! Quadratic full-attention comparator.
//!
//! Same projections and softmax as the sparse path but over all n² pairs,
//! with α matrices materialized for the backward pass — the memory/time
//! baseline the sparse path is measured against. Structural bias lookups
//! are skipped here: they are a per-pair O(1) add and not what separates
//! the two paths. When every receptive-field row is the full node set and
//! the bias table is zero, both paths compute the same function.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::sparse::{AttentionGradients, AttentionLayerParams, NodeFeatures};

/// Saved activations of a dense forward: projections and one α matrix per
/// head.
#[derive(Debug, Clone)]
pub struct DenseActivations {
    pub(crate) input: NodeFeatures,
    pub(crate) q: Vec<Array2<f64>>,
    pub(crate) k: Vec<Array2<f64>>,
    pub(crate) v: Vec<Array2<f64>>,
    pub(crate) alphas: Vec<Array2<f64>>,
}

impl DenseActivations {
    pub fn bytes(&self) -> u64 {
        let mats: usize = self
            .q
            .iter()
            .chain(&self.k)
            .chain(&self.v)
            .chain(&self.alphas)
            .map(|m| m.len() * 8)
            .sum();
        (self.input.len() * 8 + mats) as u64
    }
}

/// Full attention over all ordered pairs, heads concatenated.
pub fn dense_attention_forward(
    h: &NodeFeatures,
    params: &AttentionLayerParams,
) -> Result<(NodeFeatures, DenseActivations)> {
    let n = h.nrows();
    if h.ncols() != params.d_model() {
        return Err(Error::ShapeMismatch(format!(
            "features are {:?}, expected (_, {})",
            h.dim(),
            params.d_model()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("input features"));
    }
    let (heads, dh, dm) = (params.heads(), params.d_head(), params.d_model());
    let inv_sqrt_d = 1.0 / (dh as f64).sqrt();

    let mut out = Array2::<f64>::zeros((n, dm));
    let mut q_all = Vec::with_capacity(heads);
    let mut k_all = Vec::with_capacity(heads);
    let mut v_all = Vec::with_capacity(heads);
    let mut alphas = Vec::with_capacity(heads);
    for head in 0..heads {
        let q = h.dot(&params.p_q(head));
        let k = h.dot(&params.p_k(head));
        let v = h.dot(&params.p_v(head));
        let mut scores = q.dot(&k.t());
        scores *= inv_sqrt_d;
        for mut row in scores.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                denom += *x;
            }
            row.mapv_inplace(|x| x / denom);
        }
        let head_out = scores.dot(&v);
        out.slice_mut(ndarray::s![.., head * dh..(head + 1) * dh])
            .assign(&head_out);
        q_all.push(q);
        k_all.push(k);
        v_all.push(v);
        alphas.push(scores);
    }
    Ok((
        out,
        DenseActivations {
            input: h.clone(),
            q: q_all,
            k: k_all,
            v: v_all,
            alphas,
        },
    ))
}

/// Exact gradients of [`dense_attention_forward`]. The bias gradient slot
/// is zero-sized semantics: the dense path has no bias table, so
/// `d_bias` rows come back empty.
pub fn dense_attention_backward(
    upstream: &NodeFeatures,
    params: &AttentionLayerParams,
    acts: &DenseActivations,
) -> Result<AttentionGradients> {
    let n = acts.input.nrows();
    let (heads, dh, dm) = (params.heads(), params.d_head(), params.d_model());
    if upstream.dim() != (n, dm) {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient is {:?}, expected ({n}, {dm})",
            upstream.dim()
        )));
    }
    let inv_sqrt_d = 1.0 / (dh as f64).sqrt();

    let mut d_input = Array2::<f64>::zeros((n, dm));
    let mut d_p_q = Vec::with_capacity(heads);
    let mut d_p_k = Vec::with_capacity(heads);
    let mut d_p_v = Vec::with_capacity(heads);
    for head in 0..heads {
        let up_h = upstream
            .slice(ndarray::s![.., head * dh..(head + 1) * dh])
            .to_owned();
        let alpha = &acts.alphas[head];
        let dv = alpha.t().dot(&up_h);
        // Softmax Jacobian row-wise on dα = up · Vᵀ.
        let mut dlogits = up_h.dot(&acts.v[head].t());
        for (mut dl_row, a_row) in dlogits.rows_mut().into_iter().zip(alpha.rows()) {
            let weighted: f64 = dl_row
                .iter()
                .zip(a_row.iter())
                .map(|(dl, a)| dl * a)
                .sum();
            for (dl, a) in dl_row.iter_mut().zip(a_row.iter()) {
                *dl = a * (*dl - weighted);
            }
        }
        let dq = dlogits.dot(&acts.k[head]).mapv(|x| x * inv_sqrt_d);
        let dk = dlogits.t().dot(&acts.q[head]).mapv(|x| x * inv_sqrt_d);
        d_p_q.push(acts.input.t().dot(&dq));
        d_p_k.push(acts.input.t().dot(&dk));
        d_p_v.push(acts.input.t().dot(&dv));
        d_input = d_input
            + dq.dot(&params.p_q(head).t())
            + dk.dot(&params.p_k(head).t())
            + dv.dot(&params.p_v(head).t());
    }
    let d_bias = vec![Vec::new(); heads];
    Ok(AttentionGradients {
        d_input,
        d_p_q,
        d_p_k,
        d_p_v,
        d_bias,
    })
}
