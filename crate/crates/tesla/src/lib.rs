//! Calibration of low-cost air-quality sensors against reference-grade
//! instruments.
//!
//! The centerpiece is a small transformer that compresses each input window
//! with learnable logarithmic binning before self-attention, shrinking the
//! attention matrix from n x n to roughly log2(n) x log2(n). Around it the
//! crate provides classical linear baselines, a vanilla transformer for
//! comparison, a CSV data pipeline (cleaning, splitting, windowing), a
//! from-scratch training loop with Adam, and analytical cost profilers
//! (parameters, FLOPs, activation memory).
//!
//! All linear algebra and autodiff is hand-rolled on a dense row-major
//! [`numerics::Matrix`]; every layer ships its own explicit backward pass,
//! cross-checked against finite differences in the test suite.

pub mod binning;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
