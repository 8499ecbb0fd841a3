//! Seeded weight initialization.
//!
//! Projection weights are drawn uniformly from ±sqrt(6 / (fan_in +
//! fan_out)); normalization gains start at 1, biases at 0, and bin weights
//! at the per-bin mean (handled in the binning module). A single ChaCha
//! stream per model, consumed in fixed tensor order, makes initialization a
//! pure function of the seed.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::numerics::Matrix;

pub(crate) fn init_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Symmetric uniform initialization scaled by fan-in + fan-out of a weight
/// applied as x·W (fan_in = rows, fan_out = cols).
pub(crate) fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("glorot dimensions are consistent")
}
