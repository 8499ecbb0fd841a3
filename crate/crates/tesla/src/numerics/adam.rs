//! Adam optimizer state and the single-tensor update step.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Adam hyperparameters. Defaults are the canonical settings.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor optimizer state: first and second moment buffers shaped like
/// the parameter, and a step counter that increases by one per update.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub t: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, hyper: AdamHyper) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            hyper,
        }
    }
}

/// One Adam update with bias correction. Returns the updated parameter and
/// state rather than mutating shared buffers.
pub fn adam_step(param: &Matrix, grad: &Matrix, state: &AdamState) -> Result<(Matrix, AdamState)> {
    if param.shape() != grad.shape() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            left: param.shape(),
            right: grad.shape(),
        });
    }
    if state.m.shape() != param.shape() {
        return Err(Error::ShapeMismatch {
            op: "adam_step state",
            left: state.m.shape(),
            right: param.shape(),
        });
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite { op: "adam_step" });
    }
    let h = state.hyper;
    let t = state.t + 1;
    let mut new_param = param.clone();
    let mut new_m = state.m.clone();
    let mut new_v = state.v.clone();
    let bc1 = 1.0 - h.beta1.powi(t as i32);
    let bc2 = 1.0 - h.beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad.data()[i];
        let m = h.beta1 * new_m.data()[i] + (1.0 - h.beta1) * g;
        let v = h.beta2 * new_v.data()[i] + (1.0 - h.beta2) * g * g;
        new_m.data_mut()[i] = m;
        new_v.data_mut()[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        new_param.data_mut()[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
    Ok((
        new_param,
        AdamState {
            m: new_m,
            v: new_v,
            t,
            hyper: h,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param_and_moments_unchanged() {
        let p = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let g = Matrix::zeros(2, 2);
        let s = AdamState::new(2, 2, AdamHyper::default());
        let (p2, s2) = adam_step(&p, &g, &s).unwrap();
        assert_eq!(p2, p);
        assert_eq!(s2.m, Matrix::zeros(2, 2));
        assert_eq!(s2.v, Matrix::zeros(2, 2));
        assert_eq!(s2.t, 1);
    }

    #[test]
    fn first_step_with_constant_gradient_moves_by_about_lr() {
        // Step 1 closed form: m_hat = g, v_hat = g^2, update = lr * g/(|g|+eps).
        let p = Matrix::filled(3, 1, 10.0);
        let g = Matrix::filled(3, 1, 0.7);
        let s = AdamState::new(3, 1, AdamHyper::default());
        let (p2, _) = adam_step(&p, &g, &s).unwrap();
        for &v in p2.data() {
            assert!((v - (10.0 - 1e-3)).abs() < 1e-9, "moved by {}", 10.0 - v);
        }
    }

    #[test]
    fn two_steps_match_scalar_unroll_oracle() {
        let h = AdamHyper::default();
        let grads = [0.3, -1.1];
        let mut p = Matrix::filled(1, 1, 2.0);
        let mut s = AdamState::new(1, 1, h);
        for &g in &grads {
            let (np, ns) = adam_step(&p, &Matrix::filled(1, 1, g), &s).unwrap();
            p = np;
            s = ns;
        }

        // Hand-unrolled scalar trace of the same two steps.
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 2.0f64);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            v = h.beta2 * v + (1.0 - h.beta2) * g * g;
            let m_hat = m / (1.0 - h.beta1.powi(t));
            let v_hat = v / (1.0 - h.beta2.powi(t));
            theta -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
        assert_eq!(p.data()[0], theta);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn rejects_shape_mismatch_and_non_finite_grad() {
        let p = Matrix::zeros(2, 2);
        let s = AdamState::new(2, 2, AdamHyper::default());
        assert!(adam_step(&p, &Matrix::zeros(2, 3), &s).is_err());
        let mut g = Matrix::zeros(2, 2);
        g.data_mut()[0] = f64::INFINITY;
        assert!(adam_step(&p, &g, &s).is_err());
    }

    #[test]
    fn deterministic_repeat() {
        let p = Matrix::from_rows(&[vec![0.1, 0.2, 0.3]]).unwrap();
        let g = Matrix::from_rows(&[vec![-0.5, 0.25, 1.5]]).unwrap();
        let s = AdamState::new(1, 3, AdamHyper::default());
        let (a, sa) = adam_step(&p, &g, &s).unwrap();
        let (b, sb) = adam_step(&p, &g, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.m, sb.m);
        assert_eq!(sa.v, sb.v);
    }
}
