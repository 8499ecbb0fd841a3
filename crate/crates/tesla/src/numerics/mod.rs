//! Minimal dense-matrix kernels, the Adam optimizer, and a finite-difference
//! gradient oracle. Everything above this module is pure composition.

mod adam;
mod gradcheck;
mod matrix;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use gradcheck::finite_diff_grad;
pub use matrix::{
    layer_norm, layer_norm_backward, layer_norm_cached, matmul, softmax_rows,
    softmax_rows_backward, LayerNormCache, Matrix,
};

/// LayerNorm stabilizer used throughout the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;
