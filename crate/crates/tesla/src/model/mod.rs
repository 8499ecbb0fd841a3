//! Calibration models behind one interface: the binned-attention model and
//! the four comparison baselines (Linear, NLinear, DLinear, vanilla
//! Transformer).
//!
//! Every model maps a window of n low-cost readings (already standardized
//! by the caller) to one scalar prediction, and carries its own hand-derived
//! backward pass. Parameters live in [`ParamTensor`]s bundling value,
//! gradient buffer, and Adam state, so the training loop can drive any
//! variant identically.

mod attention;
mod baselines;
mod checkpoint;
mod init;
mod tesla;
mod transformer;

pub use baselines::{DLinearModel, LinearModel, NLinearModel, MOVING_AVERAGE_KERNEL};
pub use checkpoint::{Checkpoint, NamedTensor, Standardization, CHECKPOINT_FORMAT_VERSION};
pub use tesla::TeslaModel;
pub use transformer::TransformerModel;

use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamHyper, AdamState, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Per-reading projection only.
    Local,
    /// Per-reading projection plus a whole-window global term shared by
    /// every position.
    LocalGlobal,
}

impl std::fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingMode::Local => write!(f, "local"),
            EmbeddingMode::LocalGlobal => write!(f, "local_global"),
        }
    }
}

impl std::str::FromStr for EmbeddingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(EmbeddingMode::Local),
            "local_global" | "local+global" => Ok(EmbeddingMode::LocalGlobal),
            other => Err(Error::InvalidConfig(format!(
                "unknown embedding mode '{other}' (expected local or local_global)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorMode {
    /// Feature-wise reduction: d -> 1 per bin, then z -> 1 over bins.
    Linear,
    /// Token-wise two-layer network (hidden 4d, ramp activation) with a
    /// linear head over the newest bin.
    FeedForward,
}

impl std::fmt::Display for AggregatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregatorMode::Linear => write!(f, "linear"),
            AggregatorMode::FeedForward => write!(f, "ffn"),
        }
    }
}

impl std::str::FromStr for AggregatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(AggregatorMode::Linear),
            "ffn" | "feed_forward" | "feedforward" => Ok(AggregatorMode::FeedForward),
            other => Err(Error::InvalidConfig(format!(
                "unknown aggregator mode '{other}' (expected linear or ffn)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Tesla,
    Linear,
    NLinear,
    DLinear,
    Transformer,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::Tesla => "tesla",
            Variant::Linear => "linear",
            Variant::NLinear => "nlinear",
            Variant::DLinear => "dlinear",
            Variant::Transformer => "transformer",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tesla" => Ok(Variant::Tesla),
            "linear" => Ok(Variant::Linear),
            "nlinear" => Ok(Variant::NLinear),
            "dlinear" => Ok(Variant::DLinear),
            "transformer" => Ok(Variant::Transformer),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant '{other}' (expected tesla, linear, nlinear, dlinear, or transformer)"
            ))),
        }
    }
}

/// Architecture settings for the binned-attention model (also supplies
/// n/d/heads for the vanilla transformer baseline).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TeslaConfig {
    /// Window length.
    pub n: usize,
    /// Embedding width.
    pub d: usize,
    /// Attention head count; must divide d.
    pub heads: usize,
    pub binning: crate::binning::BinMode,
    pub embedding: EmbeddingMode,
    pub aggregator: AggregatorMode,
}

impl TeslaConfig {
    pub fn new(n: usize, d: usize, heads: usize) -> Self {
        TeslaConfig {
            n,
            d,
            heads,
            binning: crate::binning::BinMode::Log,
            embedding: EmbeddingMode::LocalGlobal,
            aggregator: AggregatorMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::WindowTooSmall { n: self.n });
        }
        if self.d == 0 || self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return Err(Error::InvalidConfig(format!(
                "embedding width {} must be a positive multiple of head count {}",
                self.d, self.heads
            )));
        }
        Ok(())
    }

    /// Bin count this configuration produces. Uniform mode reuses the
    /// logarithmic bin count so both token reductions are comparable.
    pub fn bins(&self) -> usize {
        crate::binning::log_bin_count(self.n)
    }
}

impl Default for TeslaConfig {
    /// Defaults: d = 64, 4 heads, logarithmic binning, local+global
    /// embedding, linear aggregator. n must still be chosen per dataset.
    fn default() -> Self {
        TeslaConfig::new(360, 64, 4)
    }
}

/// A learnable tensor with its gradient buffer and optimizer state.
#[derive(Clone, Debug)]
pub struct ParamTensor {
    pub value: Matrix,
    pub grad: Matrix,
    pub adam: AdamState,
}

impl ParamTensor {
    pub fn new(value: Matrix, hyper: AdamHyper) -> Self {
        let (rows, cols) = value.shape();
        ParamTensor {
            grad: Matrix::zeros(rows, cols),
            adam: AdamState::new(rows, cols, hyper),
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn scale_grad(&mut self, factor: f64) {
        self.grad.scale_in_place(factor);
    }

    /// One optimizer step from the accumulated gradient.
    pub fn adam_update(&mut self) -> Result<()> {
        let (value, adam) = adam_step(&self.value, &self.grad, &self.adam)?;
        self.value = value;
        self.adam = adam;
        Ok(())
    }
}

/// Ramp activation used by feed-forward blocks.
pub(crate) fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Backward of [`relu`]: passes the upstream gradient where the
/// pre-activation was positive.
pub(crate) fn relu_backward(grad_out: &Matrix, pre_act: &Matrix) -> Result<Matrix> {
    if grad_out.shape() != pre_act.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            left: grad_out.shape(),
            right: pre_act.shape(),
        });
    }
    let mut out = grad_out.clone();
    for (g, &z) in out.data_mut().iter_mut().zip(pre_act.data().iter()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Column sums as a 1 x cols row vector (bias gradients).
pub(crate) fn column_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for r in 0..m.rows() {
        for (acc, &v) in out.row_mut(0).iter_mut().zip(m.row(r).iter()) {
            *acc += v;
        }
    }
    out
}

fn check_window(window: &[f64], n: usize, op: &'static str) -> Result<()> {
    if window.len() != n {
        return Err(Error::ShapeMismatch {
            op,
            left: (n, 1),
            right: (window.len(), 1),
        });
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(())
}

/// Any calibration model: window of n standardized readings in, one scalar
/// prediction out, with a trainable backward pass.
// One value per training run; every variant is dominated by heap-backed
// tensors, so boxing the larger ones would only add indirection.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum CalibrationModel {
    Tesla(TeslaModel),
    Linear(LinearModel),
    NLinear(NLinearModel),
    DLinear(DLinearModel),
    Transformer(TransformerModel),
}

impl CalibrationModel {
    /// Build a freshly initialized model. `config` supplies n for every
    /// variant and d/heads/ablation toggles where they apply.
    pub fn new(variant: Variant, config: &TeslaConfig, seed: u64, hyper: AdamHyper) -> Result<Self> {
        config.validate()?;
        Ok(match variant {
            Variant::Tesla => CalibrationModel::Tesla(TeslaModel::new(*config, seed, hyper)?),
            Variant::Linear => CalibrationModel::Linear(LinearModel::new(config.n, seed, hyper)),
            Variant::NLinear => CalibrationModel::NLinear(NLinearModel::new(config.n, seed, hyper)),
            Variant::DLinear => CalibrationModel::DLinear(DLinearModel::new(config.n, seed, hyper)),
            Variant::Transformer => CalibrationModel::Transformer(TransformerModel::new(
                config.n,
                config.d,
                config.heads,
                seed,
                hyper,
            )?),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            CalibrationModel::Tesla(_) => Variant::Tesla,
            CalibrationModel::Linear(_) => Variant::Linear,
            CalibrationModel::NLinear(_) => Variant::NLinear,
            CalibrationModel::DLinear(_) => Variant::DLinear,
            CalibrationModel::Transformer(_) => Variant::Transformer,
        }
    }

    pub fn window_len(&self) -> usize {
        match self {
            CalibrationModel::Tesla(m) => m.config().n,
            CalibrationModel::Linear(m) => m.window_len(),
            CalibrationModel::NLinear(m) => m.window_len(),
            CalibrationModel::DLinear(m) => m.window_len(),
            CalibrationModel::Transformer(m) => m.window_len(),
        }
    }

    /// Pure forward pass.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        match self {
            CalibrationModel::Tesla(m) => m.forward(window),
            CalibrationModel::Linear(m) => m.forward(window),
            CalibrationModel::NLinear(m) => m.forward(window),
            CalibrationModel::DLinear(m) => m.forward(window),
            CalibrationModel::Transformer(m) => m.forward(window),
        }
    }

    /// Forward plus backward for one sample: accumulates d/dθ of
    /// ½(x̂ − target)² into the gradient buffers and returns that loss.
    /// Batch averaging is the caller's job via [`scale_grads`].
    ///
    /// [`scale_grads`]: CalibrationModel::scale_grads
    pub fn accumulate(&mut self, window: &[f64], target: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(Error::NonFinite { op: "loss target" });
        }
        match self {
            CalibrationModel::Tesla(m) => m.accumulate(window, target),
            CalibrationModel::Linear(m) => m.accumulate(window, target),
            CalibrationModel::NLinear(m) => m.accumulate(window, target),
            CalibrationModel::DLinear(m) => m.accumulate(window, target),
            CalibrationModel::Transformer(m) => m.accumulate(window, target),
        }
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.scale_grad(factor);
        }
    }

    /// One Adam step on every tensor from its accumulated gradient.
    pub fn adam_sweep(&mut self) -> Result<()> {
        for t in self.tensors_mut() {
            t.adam_update()?;
        }
        Ok(())
    }

    /// Total learnable scalar count, by enumeration.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Named views of every tensor, in a fixed canonical order.
    pub fn tensors(&self) -> Vec<(&'static str, &ParamTensor)> {
        match self {
            CalibrationModel::Tesla(m) => m.tensors(),
            CalibrationModel::Linear(m) => m.tensors(),
            CalibrationModel::NLinear(m) => m.tensors(),
            CalibrationModel::DLinear(m) => m.tensors(),
            CalibrationModel::Transformer(m) => m.tensors(),
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            CalibrationModel::Tesla(m) => m.tensors_mut(),
            CalibrationModel::Linear(m) => m.tensors_mut(),
            CalibrationModel::NLinear(m) => m.tensors_mut(),
            CalibrationModel::DLinear(m) => m.tensors_mut(),
            CalibrationModel::Transformer(m) => m.tensors_mut(),
        }
    }

    /// All parameters flattened in canonical tensor order (gradient-check
    /// plumbing).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t.value.data());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.param_count();
        if flat.len() != total {
            return Err(Error::ShapeMismatch {
                op: "set_flat_params",
                left: (total, 1),
                right: (flat.len(), 1),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.value.len();
            t.value.data_mut().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// All accumulated gradients flattened in canonical tensor order.
    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t.grad.data());
        }
        out
    }
}
