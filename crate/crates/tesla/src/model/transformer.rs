//! Vanilla transformer baseline: one post-norm encoder layer over the full
//! window, read out at the newest token.
//!
//! Forward:
//!   E  = x_i·W_embed + P_i            (learned positional rows P)
//!   A  = MultiHead(E)·W_o
//!   Y1 = LayerNorm(E + A)
//!   F  = relu(Y1·W1 + b1)·W2 + b2     (token-wise, hidden 4d)
//!   Y2 = LayerNorm(Y1 + F)
//!   x̂  = Y2[n−1]·w_head + b_head
//!
//! Attention here is the full n x n variant — this model is the cost
//! yardstick the binned model is measured against.

use crate::error::Result;
use crate::numerics::{
    layer_norm_backward, layer_norm_cached, matmul, AdamHyper, Matrix, LAYER_NORM_EPS,
};

use super::attention::{attention_backward, attention_forward};
use super::init::{glorot_uniform, init_rng};
use super::{check_window, column_sums, relu, relu_backward, ParamTensor};

#[derive(Clone, Debug)]
pub struct TransformerModel {
    n: usize,
    d: usize,
    heads: usize,
    /// 1 x d token projection.
    w_embed: ParamTensor,
    /// n x d learned positional rows.
    positional: ParamTensor,
    /// d x d each.
    w_q: ParamTensor,
    w_k: ParamTensor,
    w_v: ParamTensor,
    w_o: ParamTensor,
    /// 1 x d each.
    ln1_gain: ParamTensor,
    ln1_bias: ParamTensor,
    /// d x 4d.
    ffn_w1: ParamTensor,
    /// 1 x 4d.
    ffn_b1: ParamTensor,
    /// 4d x d.
    ffn_w2: ParamTensor,
    /// 1 x d.
    ffn_b2: ParamTensor,
    /// 1 x d each.
    ln2_gain: ParamTensor,
    ln2_bias: ParamTensor,
    /// d x 1.
    head_w: ParamTensor,
    /// 1 x 1.
    head_b: ParamTensor,
}

impl TransformerModel {
    pub fn new(n: usize, d: usize, heads: usize, seed: u64, hyper: AdamHyper) -> Result<Self> {
        if heads == 0 || d == 0 || !d.is_multiple_of(heads) {
            return Err(crate::error::Error::InvalidConfig(format!(
                "embedding width {d} must be a positive multiple of head count {heads}"
            )));
        }
        if n < 2 {
            return Err(crate::error::Error::WindowTooSmall { n });
        }
        let mut rng = init_rng(seed);
        Ok(TransformerModel {
            n,
            d,
            heads,
            w_embed: ParamTensor::new(glorot_uniform(1, d, &mut rng), hyper),
            positional: ParamTensor::new(glorot_uniform(n, d, &mut rng), hyper),
            w_q: ParamTensor::new(glorot_uniform(d, d, &mut rng), hyper),
            w_k: ParamTensor::new(glorot_uniform(d, d, &mut rng), hyper),
            w_v: ParamTensor::new(glorot_uniform(d, d, &mut rng), hyper),
            w_o: ParamTensor::new(glorot_uniform(d, d, &mut rng), hyper),
            ln1_gain: ParamTensor::new(Matrix::filled(1, d, 1.0), hyper),
            ln1_bias: ParamTensor::new(Matrix::zeros(1, d), hyper),
            ffn_w1: ParamTensor::new(glorot_uniform(d, 4 * d, &mut rng), hyper),
            ffn_b1: ParamTensor::new(Matrix::zeros(1, 4 * d), hyper),
            ffn_w2: ParamTensor::new(glorot_uniform(4 * d, d, &mut rng), hyper),
            ffn_b2: ParamTensor::new(Matrix::zeros(1, d), hyper),
            ln2_gain: ParamTensor::new(Matrix::filled(1, d, 1.0), hyper),
            ln2_bias: ParamTensor::new(Matrix::zeros(1, d), hyper),
            head_w: ParamTensor::new(glorot_uniform(d, 1, &mut rng), hyper),
            head_b: ParamTensor::new(Matrix::zeros(1, 1), hyper),
        })
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    fn embed(&self, window: &[f64]) -> Matrix {
        let mut e = self.positional.value.clone();
        let proj = self.w_embed.value.row(0);
        for (i, &x) in window.iter().enumerate() {
            for (v, &w) in e.row_mut(i).iter_mut().zip(proj.iter()) {
                *v += x * w;
            }
        }
        e
    }

    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        self.forward_impl(window, None)
    }

    pub fn accumulate(&mut self, window: &[f64], target: f64) -> Result<f64> {
        let mut loss = 0.0;
        // Split borrow: run forward immutably, then apply the recorded
        // adjoints. forward_impl fills `loss` and gradient work happens in
        // backward_impl below.
        let cache = self.collect_cache(window)?;
        let residual = cache.xhat - target;
        loss += 0.5 * residual * residual;
        self.backward_impl(window, residual, &cache)?;
        Ok(loss)
    }

    fn forward_impl(&self, window: &[f64], sink: Option<&mut Cache>) -> Result<f64> {
        check_window(window, self.n, "transformer forward")?;
        let e = self.embed(window);
        let (a_core, attn) = attention_forward(
            &e,
            &self.w_q.value,
            &self.w_k.value,
            &self.w_v.value,
            self.heads,
        )?;
        let a = matmul(&a_core, &self.w_o.value)?;
        let r1 = e.add(&a)?;
        let (y1, ln1) = layer_norm_cached(&r1, &self.ln1_gain.value, &self.ln1_bias.value, LAYER_NORM_EPS)?;

        let mut z1 = matmul(&y1, &self.ffn_w1.value)?;
        for r in 0..z1.rows() {
            for (v, &b) in z1.row_mut(r).iter_mut().zip(self.ffn_b1.value.row(0).iter()) {
                *v += b;
            }
        }
        let a1 = relu(&z1);
        let mut f = matmul(&a1, &self.ffn_w2.value)?;
        for r in 0..f.rows() {
            for (v, &b) in f.row_mut(r).iter_mut().zip(self.ffn_b2.value.row(0).iter()) {
                *v += b;
            }
        }
        let r2 = y1.add(&f)?;
        let (y2, ln2) = layer_norm_cached(&r2, &self.ln2_gain.value, &self.ln2_bias.value, LAYER_NORM_EPS)?;
        let xhat = y2
            .row(self.n - 1)
            .iter()
            .zip(self.head_w.value.data().iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.head_b.value[(0, 0)];
        if !xhat.is_finite() {
            return Err(crate::error::Error::NonFinite { op: "transformer forward" });
        }
        if let Some(c) = sink {
            *c = Cache { e, attn, a_core, ln1, y1, z1, a1, ln2, y2, xhat };
        }
        Ok(xhat)
    }

    fn collect_cache(&self, window: &[f64]) -> Result<Cache> {
        let mut cache = Cache::empty();
        self.forward_impl(window, Some(&mut cache))?;
        Ok(cache)
    }

    fn backward_impl(&mut self, window: &[f64], residual: f64, cache: &Cache) -> Result<()> {
        let n = self.n;
        let d = self.d;

        // Head reads the newest token of Y2.
        let mut grad_y2 = Matrix::zeros(n, d);
        for (g, &w) in grad_y2.row_mut(n - 1).iter_mut().zip(self.head_w.value.data().iter()) {
            *g = residual * w;
        }
        let mut gw_head = Matrix::column(cache.y2.row(n - 1));
        gw_head.scale_in_place(residual);
        self.head_w.grad.add_in_place(&gw_head)?;
        self.head_b.grad[(0, 0)] += residual;

        let (grad_r2, g_gain2, g_bias2) =
            layer_norm_backward(&grad_y2, &cache.ln2, &self.ln2_gain.value)?;
        self.ln2_gain.grad.add_in_place(&g_gain2)?;
        self.ln2_bias.grad.add_in_place(&g_bias2)?;

        // R2 = Y1 + F: the residual branch and the feed-forward branch both
        // receive grad_r2.
        let grad_f = &grad_r2;
        let grad_a1 = matmul(grad_f, &self.ffn_w2.value.transpose())?;
        self.ffn_w2
            .grad
            .add_in_place(&matmul(&cache.a1.transpose(), grad_f)?)?;
        self.ffn_b2.grad.add_in_place(&column_sums(grad_f))?;

        let grad_z1 = relu_backward(&grad_a1, &cache.z1)?;
        self.ffn_w1
            .grad
            .add_in_place(&matmul(&cache.y1.transpose(), &grad_z1)?)?;
        self.ffn_b1.grad.add_in_place(&column_sums(&grad_z1))?;

        let mut grad_y1 = matmul(&grad_z1, &self.ffn_w1.value.transpose())?;
        grad_y1.add_in_place(&grad_r2)?;

        let (grad_r1, g_gain1, g_bias1) =
            layer_norm_backward(&grad_y1, &cache.ln1, &self.ln1_gain.value)?;
        self.ln1_gain.grad.add_in_place(&g_gain1)?;
        self.ln1_bias.grad.add_in_place(&g_bias1)?;

        // R1 = E + A_core·W_o.
        let grad_a = &grad_r1;
        self.w_o
            .grad
            .add_in_place(&matmul(&cache.a_core.transpose(), grad_a)?)?;
        let grad_a_core = matmul(grad_a, &self.w_o.value.transpose())?;

        let (grad_e_attn, g_wq, g_wk, g_wv) = attention_backward(
            &grad_a_core,
            &cache.e,
            &self.w_q.value,
            &self.w_k.value,
            &self.w_v.value,
            self.heads,
            &cache.attn,
        )?;
        self.w_q.grad.add_in_place(&g_wq)?;
        self.w_k.grad.add_in_place(&g_wk)?;
        self.w_v.grad.add_in_place(&g_wv)?;

        let mut grad_e = grad_e_attn;
        grad_e.add_in_place(&grad_r1)?;

        self.w_embed
            .grad
            .add_in_place(&matmul(&Matrix::row_vector(window), &grad_e)?)?;
        self.positional.grad.add_in_place(&grad_e)?;
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(&'static str, &ParamTensor)> {
        vec![
            ("w_embed", &self.w_embed),
            ("positional", &self.positional),
            ("w_q", &self.w_q),
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_o", &self.w_o),
            ("ln1_gain", &self.ln1_gain),
            ("ln1_bias", &self.ln1_bias),
            ("ffn_w1", &self.ffn_w1),
            ("ffn_b1", &self.ffn_b1),
            ("ffn_w2", &self.ffn_w2),
            ("ffn_b2", &self.ffn_b2),
            ("ln2_gain", &self.ln2_gain),
            ("ln2_bias", &self.ln2_bias),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.w_embed,
            &mut self.positional,
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.ffn_w1,
            &mut self.ffn_b1,
            &mut self.ffn_w2,
            &mut self.ffn_b2,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.head_w,
            &mut self.head_b,
        ]
    }
}

struct Cache {
    e: Matrix,
    attn: super::attention::AttentionCache,
    a_core: Matrix,
    ln1: crate::numerics::LayerNormCache,
    y1: Matrix,
    z1: Matrix,
    a1: Matrix,
    ln2: crate::numerics::LayerNormCache,
    y2: Matrix,
    xhat: f64,
}

impl Cache {
    fn empty() -> Self {
        Cache {
            e: Matrix::zeros(1, 1),
            attn: super::attention::AttentionCache {
                q: Matrix::zeros(1, 1),
                k: Matrix::zeros(1, 1),
                v: Matrix::zeros(1, 1),
                probs: Vec::new(),
            },
            a_core: Matrix::zeros(1, 1),
            ln1: crate::numerics::LayerNormCache {
                normalized: Matrix::zeros(1, 1),
                inv_std: Vec::new(),
            },
            y1: Matrix::zeros(1, 1),
            z1: Matrix::zeros(1, 1),
            a1: Matrix::zeros(1, 1),
            ln2: crate::numerics::LayerNormCache {
                normalized: Matrix::zeros(1, 1),
                inv_std: Vec::new(),
            },
            y2: Matrix::zeros(1, 1),
            xhat: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CalibrationModel, TeslaConfig, Variant};
    use crate::numerics::finite_diff_grad;

    fn window(n: usize, salt: u64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let h = (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(salt);
                ((h >> 40) % 2001) as f64 / 1000.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn parameter_count_closed_form() {
        // n·d + 12d² + 11d + 1.
        let m = TransformerModel::new(12, 8, 2, 1, AdamHyper::default()).unwrap();
        let count: usize = m.tensors().iter().map(|(_, t)| t.len()).sum();
        assert_eq!(count, 12 * 8 + 12 * 64 + 11 * 8 + 1);
    }

    #[test]
    fn forward_is_deterministic_and_finite() {
        let m = TransformerModel::new(10, 8, 2, 5, AdamHyper::default()).unwrap();
        let w = window(10, 1);
        let a = m.forward(&w).unwrap();
        let b = m.forward(&w).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
    }

    #[test]
    fn positional_rows_break_permutation_symmetry() {
        // Swapping two readings changes the output because positions carry
        // their own learned rows.
        let m = TransformerModel::new(6, 4, 2, 5, AdamHyper::default()).unwrap();
        let w = window(6, 1);
        let mut swapped = w.clone();
        swapped.swap(0, 3);
        let a = m.forward(&w).unwrap();
        let b = m.forward(&swapped).unwrap();
        assert!((a - b).abs() > 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = TeslaConfig::new(6, 4, 2);
        let model =
            CalibrationModel::new(Variant::Transformer, &cfg, 17, AdamHyper::default()).unwrap();
        let w = window(6, 23);
        let target = -0.8;
        let theta0 = model.flat_params();
        let loss_fn = |theta: &[f64]| {
            let mut m = model.clone();
            m.set_flat_params(theta)?;
            let xhat = m.predict(&w)?;
            Ok(0.5 * (xhat - target) * (xhat - target))
        };
        let fd = finite_diff_grad(loss_fn, &theta0, 1e-5).unwrap();
        let mut m = model.clone();
        m.accumulate(&w, target).unwrap();
        let analytic = m.flat_grads();
        for (i, (a, b)) in analytic.iter().zip(fd.iter()).enumerate() {
            let tol = (1e-4 * a.abs().max(b.abs())).max(1e-8);
            assert!((a - b).abs() <= tol, "coord {i}: analytic {a} vs fd {b}");
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        let mut m = TransformerModel::new(8, 4, 2, 3, AdamHyper::default()).unwrap();
        let w = window(8, 31);
        let target = m.forward(&w).unwrap();
        let loss = m.accumulate(&w, target).unwrap();
        assert_eq!(loss, 0.0);
        for t in m.tensors_mut() {
            assert!(t.grad.data().iter().all(|&v| v == 0.0));
        }
    }
}
