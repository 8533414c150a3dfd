//! Reference single-head self-attention and the exact algebraic expansion of
//! two stacked layers. The expansion shows a stacked-attention output is
//! still a weighted sum of single-node embeddings, in contrast to the
//! graph embedding's weighted sum of node-pair embeddings.

use crate::numerics::tensor::Tensor;
use crate::numerics::{softmax, Scalar};
use crate::{Error, Result};

/// Projection matrices of one attention layer; all share input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer<F> {
    pub w_q: Tensor<F>,
    pub w_k: Tensor<F>,
    pub w_v: Tensor<F>,
}

impl<F: Scalar> AttentionLayer<F> {
    pub fn new(w_q: Tensor<F>, w_k: Tensor<F>, w_v: Tensor<F>) -> Result<Self> {
        let d = w_q.cols();
        if w_k.cols() != d || w_v.cols() != d {
            return Err(Error::shape(
                "attention projections input dimension",
                d,
                format!("{} / {}", w_k.cols(), w_v.cols()),
            ));
        }
        if w_q.rows() != w_k.rows() {
            return Err(Error::shape(
                "query/key output dimension",
                w_q.rows(),
                w_k.rows(),
            ));
        }
        Ok(AttentionLayer { w_q, w_k, w_v })
    }

    pub fn input_dim(&self) -> usize {
        self.w_q.cols()
    }
}

fn matvec<F: Scalar>(m: &Tensor<F>, x: &[F]) -> Vec<F> {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert_eq!(cols, x.len());
    let mut out = vec![F::zero(); rows];
    for i in 0..rows {
        let mut acc = F::zero();
        for j in 0..cols {
            acc += m.at(i, j) * x[j];
        }
        out[i] = acc;
    }
    out
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Attention weight matrix over a window: row i holds softmax over j of
/// score(W_q h_i, W_k h_j), with score(q, k) = k^T q / sqrt(d_k).
pub fn attention_weights<F: Scalar>(
    window: &[Vec<F>],
    layer: &AttentionLayer<F>,
) -> Result<Vec<Vec<F>>> {
    if window.is_empty() {
        return Err(Error::Config("attention window is empty".into()));
    }
    for h in window {
        if h.len() != layer.input_dim() {
            return Err(Error::shape("attention input", layer.input_dim(), h.len()));
        }
    }
    let queries: Vec<Vec<F>> = window.iter().map(|h| matvec(&layer.w_q, h)).collect();
    let keys: Vec<Vec<F>> = window.iter().map(|h| matvec(&layer.w_k, h)).collect();
    let scale = F::one() / F::from_f64_c(layer.w_k.rows() as f64).sqrt();
    let mut rows = Vec::with_capacity(window.len());
    for q in &queries {
        let scores: Vec<F> = keys.iter().map(|k| dot(k, q) * scale).collect();
        rows.push(softmax(&scores)?);
    }
    Ok(rows)
}

/// Attended embeddings e_i = sum_j alpha_ij W_v h_j for every window slot.
pub fn attend_all<F: Scalar>(window: &[Vec<F>], layer: &AttentionLayer<F>) -> Result<Vec<Vec<F>>> {
    let alpha = attention_weights(window, layer)?;
    let values: Vec<Vec<F>> = window.iter().map(|h| matvec(&layer.w_v, h)).collect();
    let out_dim = layer.w_v.rows();
    let mut out = Vec::with_capacity(window.len());
    for row in &alpha {
        let mut e = vec![F::zero(); out_dim];
        for (a, v) in row.iter().zip(&values) {
            for (acc, &x) in e.iter_mut().zip(v) {
                *acc += *a * x;
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Single-head self-attention over a window; returns the representation of
/// the last position.
pub fn self_attention<F: Scalar>(window: &[Vec<F>], layer: &AttentionLayer<F>) -> Result<Vec<F>> {
    let mut all = attend_all(window, layer)?;
    Ok(all.pop().unwrap())
}

/// Result of running two stacked layers on a two-node window both directly
/// and through the closed-form expansion into single-node terms.
#[derive(Debug, Clone)]
pub struct StackedExpansion<F> {
    pub direct: Vec<F>,
    pub expanded: Vec<F>,
    pub max_abs_diff: F,
}

/// Two stacked attention layers on nodes (h1, h2), compared against the
/// expansion
///   (a11 b21 + a21 b22) Wv2 Wv1 h1 + (a12 b21 + a22 b22) Wv2 Wv1 h2,
/// where a = layer-1 weights on (h1, h2) and b = layer-2 weights on the
/// layer-1 outputs. The two routes agree to floating-point roundoff.
pub fn stacked_attention_identity<F: Scalar>(
    h1: &[F],
    h2: &[F],
    layers: &[AttentionLayer<F>; 2],
) -> Result<StackedExpansion<F>> {
    let window = vec![h1.to_vec(), h2.to_vec()];
    let alpha1 = attention_weights(&window, &layers[0])?;
    let level1 = attend_all(&window, &layers[0])?;
    let alpha2 = attention_weights(&level1, &layers[1])?;
    let level2 = attend_all(&level1, &layers[1])?;
    let direct = level2[1].clone();

    let v1_h1 = matvec(&layers[0].w_v, h1);
    let v1_h2 = matvec(&layers[0].w_v, h2);
    let vv_h1 = matvec(&layers[1].w_v, &v1_h1);
    let vv_h2 = matvec(&layers[1].w_v, &v1_h2);
    let c1 = alpha1[0][0] * alpha2[1][0] + alpha1[1][0] * alpha2[1][1];
    let c2 = alpha1[0][1] * alpha2[1][0] + alpha1[1][1] * alpha2[1][1];
    let expanded: Vec<F> = vv_h1
        .iter()
        .zip(&vv_h2)
        .map(|(&a, &b)| c1 * a + c2 * b)
        .collect();

    let max_abs_diff = direct
        .iter()
        .zip(&expanded)
        .map(|(&d, &e)| (d - e).abs())
        .fold(F::zero(), F::max);
    Ok(StackedExpansion {
        direct,
        expanded,
        max_abs_diff,
    })
}
