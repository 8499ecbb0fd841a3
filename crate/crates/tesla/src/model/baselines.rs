//! Linear calibration baselines.
//!
//! - Linear: x̂ = wᵀs + b, a direct affine map of the window.
//! - NLinear: subtract the newest reading from the window, apply the affine
//!   map, add the reading back — a cheap guard against level shift.
//! - DLinear: split the window into a moving-average trend and the
//!   remainder, calibrate each with its own affine head, and sum.

use crate::error::Result;
use crate::numerics::{AdamHyper, Matrix};

use super::init::{glorot_uniform, init_rng};
use super::{check_window, ParamTensor};

/// Moving-average width used by the trend/remainder decomposition.
pub const MOVING_AVERAGE_KERNEL: usize = 25;

#[derive(Clone, Debug)]
pub struct LinearModel {
    n: usize,
    /// n x 1.
    weights: ParamTensor,
    /// 1 x 1.
    bias: ParamTensor,
}

impl LinearModel {
    pub fn new(n: usize, seed: u64, hyper: AdamHyper) -> Self {
        let mut rng = init_rng(seed);
        LinearModel {
            n,
            weights: ParamTensor::new(glorot_uniform(n, 1, &mut rng), hyper),
            bias: ParamTensor::new(Matrix::zeros(1, 1), hyper),
        }
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        check_window(window, self.n, "linear forward")?;
        let dot: f64 = window
            .iter()
            .zip(self.weights.value.data().iter())
            .map(|(x, w)| x * w)
            .sum();
        Ok(dot + self.bias.value[(0, 0)])
    }

    pub fn accumulate(&mut self, window: &[f64], target: f64) -> Result<f64> {
        let xhat = self.forward(window)?;
        let residual = xhat - target;
        for (g, &x) in self.weights.grad.data_mut().iter_mut().zip(window.iter()) {
            *g += residual * x;
        }
        self.bias.grad[(0, 0)] += residual;
        Ok(0.5 * residual * residual)
    }

    pub fn tensors(&self) -> Vec<(&'static str, &ParamTensor)> {
        vec![("weights", &self.weights), ("bias", &self.bias)]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weights, &mut self.bias]
    }
}

#[derive(Clone, Debug)]
pub struct NLinearModel {
    n: usize,
    /// n x 1.
    weights: ParamTensor,
    /// 1 x 1.
    bias: ParamTensor,
}

impl NLinearModel {
    pub fn new(n: usize, seed: u64, hyper: AdamHyper) -> Self {
        let mut rng = init_rng(seed);
        NLinearModel {
            n,
            weights: ParamTensor::new(glorot_uniform(n, 1, &mut rng), hyper),
            bias: ParamTensor::new(Matrix::zeros(1, 1), hyper),
        }
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        check_window(window, self.n, "nlinear forward")?;
        let last = window[self.n - 1];
        let dot: f64 = window
            .iter()
            .zip(self.weights.value.data().iter())
            .map(|(x, w)| (x - last) * w)
            .sum();
        Ok(dot + self.bias.value[(0, 0)] + last)
    }

    pub fn accumulate(&mut self, window: &[f64], target: f64) -> Result<f64> {
        let xhat = self.forward(window)?;
        let residual = xhat - target;
        let last = window[self.n - 1];
        for (g, &x) in self.weights.grad.data_mut().iter_mut().zip(window.iter()) {
            *g += residual * (x - last);
        }
        self.bias.grad[(0, 0)] += residual;
        Ok(0.5 * residual * residual)
    }

    pub fn tensors(&self) -> Vec<(&'static str, &ParamTensor)> {
        vec![("weights", &self.weights), ("bias", &self.bias)]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weights, &mut self.bias]
    }
}

/// Edge-padded moving average of the window (the trend component).
///
/// The window is padded by repeating its first and last values for
/// (kernel − 1) / 2 positions on each side, so the output has the same
/// length as the input.
pub(crate) fn moving_average(window: &[f64], kernel: usize) -> Vec<f64> {
    debug_assert!(kernel % 2 == 1, "kernel must be odd for symmetric padding");
    let n = window.len();
    let half = kernel / 2;
    let at = |p: i64| -> f64 {
        let idx = p.clamp(0, n as i64 - 1) as usize;
        window[idx]
    };
    (0..n as i64)
        .map(|i| {
            let mut acc = 0.0;
            for p in (i - half as i64)..=(i + half as i64) {
                acc += at(p);
            }
            acc / kernel as f64
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DLinearModel {
    n: usize,
    /// n x 1 over the trend component.
    trend_weights: ParamTensor,
    /// 1 x 1.
    trend_bias: ParamTensor,
    /// n x 1 over the remainder component.
    remainder_weights: ParamTensor,
    /// 1 x 1.
    remainder_bias: ParamTensor,
}

impl DLinearModel {
    pub fn new(n: usize, seed: u64, hyper: AdamHyper) -> Self {
        let mut rng = init_rng(seed);
        DLinearModel {
            n,
            trend_weights: ParamTensor::new(glorot_uniform(n, 1, &mut rng), hyper),
            trend_bias: ParamTensor::new(Matrix::zeros(1, 1), hyper),
            remainder_weights: ParamTensor::new(glorot_uniform(n, 1, &mut rng), hyper),
            remainder_bias: ParamTensor::new(Matrix::zeros(1, 1), hyper),
        }
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    fn decompose(&self, window: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let trend = moving_average(window, MOVING_AVERAGE_KERNEL);
        let remainder = window.iter().zip(trend.iter()).map(|(x, t)| x - t).collect();
        (trend, remainder)
    }

    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        check_window(window, self.n, "dlinear forward")?;
        let (trend, remainder) = self.decompose(window);
        let t: f64 = trend
            .iter()
            .zip(self.trend_weights.value.data().iter())
            .map(|(x, w)| x * w)
            .sum();
        let r: f64 = remainder
            .iter()
            .zip(self.remainder_weights.value.data().iter())
            .map(|(x, w)| x * w)
            .sum();
        Ok(t + self.trend_bias.value[(0, 0)] + r + self.remainder_bias.value[(0, 0)])
    }

    pub fn accumulate(&mut self, window: &[f64], target: f64) -> Result<f64> {
        let xhat = self.forward(window)?;
        let residual = xhat - target;
        let (trend, remainder) = self.decompose(window);
        for (g, &x) in self.trend_weights.grad.data_mut().iter_mut().zip(trend.iter()) {
            *g += residual * x;
        }
        for (g, &x) in self
            .remainder_weights
            .grad
            .data_mut()
            .iter_mut()
            .zip(remainder.iter())
        {
            *g += residual * x;
        }
        self.trend_bias.grad[(0, 0)] += residual;
        self.remainder_bias.grad[(0, 0)] += residual;
        Ok(0.5 * residual * residual)
    }

    pub fn tensors(&self) -> Vec<(&'static str, &ParamTensor)> {
        vec![
            ("trend_weights", &self.trend_weights),
            ("trend_bias", &self.trend_bias),
            ("remainder_weights", &self.remainder_weights),
            ("remainder_bias", &self.remainder_bias),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.trend_weights,
            &mut self.trend_bias,
            &mut self.remainder_weights,
            &mut self.remainder_bias,
        ]
    }
}
