//! Multi-head self-attention over t tokens, shared by the binned model
//! (t = bin count) and the vanilla transformer baseline (t = window
//! length).
//!
//! Forward: Q = X·W_q, K = X·W_k, V = X·W_v; per head, slice d/h columns
//! and compute softmax(Q K^T / sqrt(d/h)) V; concatenate head outputs.
//! There is no output projection and no masking — attention is fully
//! bidirectional.
//!
//! Backward (per head, with P the softmax output, S the logits):
//!   dV = P^T dY,  dP = dY V^T,  dS = P ⊙ (dP − rowsum(dP ⊙ P)),
//!   dQ = dS K / sqrt(d_h),  dK = dS^T Q / sqrt(d_h),
//! then dW_* = X^T dQ/dK/dV and dX = dQ W_q^T + dK W_k^T + dV W_v^T.

use crate::error::{Error, Result};
use crate::numerics::{matmul, softmax_rows, softmax_rows_backward, Matrix};

/// Activations from [`attention_forward`] needed by the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct AttentionCache {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Per-head softmax outputs, each t x t.
    pub probs: Vec<Matrix>,
}

fn head_slice(m: &Matrix, head: usize, d_head: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), d_head);
    let start = head * d_head;
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(&m.row(r)[start..start + d_head]);
    }
    out
}

fn head_emplace(target: &mut Matrix, src: &Matrix, head: usize, d_head: usize) {
    let start = head * d_head;
    for r in 0..src.rows() {
        target.row_mut(r)[start..start + d_head].copy_from_slice(src.row(r));
    }
}

fn check_heads(d: usize, heads: usize) -> Result<usize> {
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::InvalidConfig(format!(
            "attention width {d} is not divisible by head count {heads}"
        )));
    }
    Ok(d / heads)
}

/// Multi-head self-attention over the rows of `x` (t x d).
pub(crate) fn attention_forward(
    x: &Matrix,
    w_q: &Matrix,
    w_k: &Matrix,
    w_v: &Matrix,
    heads: usize,
) -> Result<(Matrix, AttentionCache)> {
    let d = x.cols();
    let d_head = check_heads(d, heads)?;
    let q = matmul(x, w_q)?;
    let k = matmul(x, w_k)?;
    let v = matmul(x, w_v)?;
    let scale = 1.0 / (d_head as f64).sqrt();

    let mut y = Matrix::zeros(x.rows(), d);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = head_slice(&q, h, d_head);
        let kh = head_slice(&k, h, d_head);
        let vh = head_slice(&v, h, d_head);
        let mut scores = matmul(&qh, &kh.transpose())?;
        scores.scale_in_place(scale);
        let p = softmax_rows(&scores)?;
        let yh = matmul(&p, &vh)?;
        head_emplace(&mut y, &yh, h, d_head);
        probs.push(p);
    }
    Ok((y, AttentionCache { q, k, v, probs }))
}

/// Gradients of [`attention_forward`] with respect to the input rows and
/// the three projection matrices.
pub(crate) fn attention_backward(
    grad_y: &Matrix,
    x: &Matrix,
    w_q: &Matrix,
    w_k: &Matrix,
    w_v: &Matrix,
    heads: usize,
    cache: &AttentionCache,
) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
    let d = x.cols();
    let d_head = check_heads(d, heads)?;
    if grad_y.shape() != (x.rows(), d) {
        return Err(Error::ShapeMismatch {
            op: "attention_backward",
            left: (x.rows(), d),
            right: grad_y.shape(),
        });
    }
    let scale = 1.0 / (d_head as f64).sqrt();

    let mut grad_q = Matrix::zeros(x.rows(), d);
    let mut grad_k = Matrix::zeros(x.rows(), d);
    let mut grad_v = Matrix::zeros(x.rows(), d);
    for h in 0..heads {
        let p = &cache.probs[h];
        let qh = head_slice(&cache.q, h, d_head);
        let kh = head_slice(&cache.k, h, d_head);
        let vh = head_slice(&cache.v, h, d_head);
        let gyh = head_slice(grad_y, h, d_head);

        let gv = matmul(&p.transpose(), &gyh)?;
        let gp = matmul(&gyh, &vh.transpose())?;
        let mut gs = softmax_rows_backward(&gp, p)?;
        gs.scale_in_place(scale);
        let gq = matmul(&gs, &kh)?;
        let gk = matmul(&gs.transpose(), &qh)?;

        head_emplace(&mut grad_q, &gq, h, d_head);
        head_emplace(&mut grad_k, &gk, h, d_head);
        head_emplace(&mut grad_v, &gv, h, d_head);
    }

    let xt = x.transpose();
    let grad_wq = matmul(&xt, &grad_q)?;
    let grad_wk = matmul(&xt, &grad_k)?;
    let grad_wv = matmul(&xt, &grad_v)?;

    let mut grad_x = matmul(&grad_q, &w_q.transpose())?;
    grad_x.add_in_place(&matmul(&grad_k, &w_k.transpose())?)?;
    grad_x.add_in_place(&matmul(&grad_v, &w_v.transpose())?)?;
    Ok((grad_x, grad_wq, grad_wk, grad_wv))
}
