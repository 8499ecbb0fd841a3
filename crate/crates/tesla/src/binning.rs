//! Logarithmic (and uniform) token binning.
//!
//! A window of n tokens is partitioned into z contiguous bins whose widths
//! shrink toward the present: the most recent token sits alone in its own
//! bin while older tokens are grouped on a doubling scale. Each bin is
//! collapsed to a single embedding row by a learnable weighted average,
//! which is what drops attention cost from O(n^2) to O(log^2 n).

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinMode {
    Log,
    Uniform,
}

impl std::fmt::Display for BinMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BinMode::Log => write!(f, "log"),
            BinMode::Uniform => write!(f, "uniform"),
        }
    }
}

impl std::str::FromStr for BinMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(BinMode::Log),
            "uniform" => Ok(BinMode::Uniform),
            other => Err(Error::InvalidConfig(format!(
                "unknown binning mode '{other}' (expected log or uniform)"
            ))),
        }
    }
}

/// A partition of token positions 1..=n into z contiguous bins.
///
/// Boundaries are 1-based: bin j (1-based) covers token indices
/// [alpha[j-1], alpha[j] - 1]. Always alpha[0] = 1 and alpha[z] = n + 1.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BinLayout {
    n: usize,
    z: usize,
    alpha: Vec<usize>,
    mode: BinMode,
}

impl BinLayout {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> usize {
        self.z
    }

    /// Boundary indices alpha_0..alpha_z (1-based, length z + 1).
    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn mode(&self) -> BinMode {
        self.mode
    }

    /// Width of bin j (0-based).
    pub fn width(&self, j: usize) -> usize {
        self.alpha[j + 1] - self.alpha[j]
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.z).map(|j| self.width(j)).collect()
    }

    /// 0-based token range covered by bin j (0-based): start..end.
    pub fn token_range(&self, j: usize) -> std::ops::Range<usize> {
        (self.alpha[j] - 1)..(self.alpha[j + 1] - 1)
    }
}

/// Number of bins the logarithmic layout produces for a window of length n.
pub fn log_bin_count(n: usize) -> usize {
    debug_assert!(n >= 2);
    // ceil(log2 n)
    ((n - 1).ilog2() + 1) as usize
}

/// Logarithmic bin layout for a window of n tokens.
///
/// z = ceil(log2 n); boundaries alpha_j = max(1, n - 2^(z-j) + 2) for
/// j in 1..=z, with alpha_0 pinned to 1 so the oldest bin absorbs the
/// remainder and every token is covered. The newest bin has width 1 for
/// all n >= 3.
pub fn bin_layout(n: usize) -> Result<BinLayout> {
    if n < 2 {
        return Err(Error::WindowTooSmall { n });
    }
    let z = log_bin_count(n);
    let mut alpha = Vec::with_capacity(z + 1);
    alpha.push(1usize);
    for j in 1..=z {
        let raw = n as i64 - (1i64 << (z - j)) + 2;
        alpha.push(raw.max(1) as usize);
    }
    debug_assert_eq!(*alpha.last().unwrap(), n + 1);
    Ok(BinLayout {
        n,
        z,
        alpha,
        mode: BinMode::Log,
    })
}

/// Uniform layout: z contiguous bins whose widths differ by at most one,
/// with the remainder going to the oldest bins.
pub fn uniform_layout(n: usize, z: usize) -> Result<BinLayout> {
    if n < 2 {
        return Err(Error::WindowTooSmall { n });
    }
    if z == 0 || z > n {
        return Err(Error::BinCountOutOfRange { z, n });
    }
    let base = n / z;
    let remainder = n % z;
    let mut alpha = Vec::with_capacity(z + 1);
    alpha.push(1usize);
    let mut next = 1usize;
    for j in 0..z {
        next += base + usize::from(j < remainder);
        alpha.push(next);
    }
    Ok(BinLayout {
        n,
        z,
        alpha,
        mode: BinMode::Uniform,
    })
}

/// Per-bin learnable weight vectors, stored flat: bin j owns the slice of
/// positions it covers, so the total scalar count is exactly n.
#[derive(Clone, Debug, PartialEq)]
pub struct BinWeights {
    flat: Vec<f64>,
}

impl BinWeights {
    /// Weights initialized to 1/width per bin, so binning starts as the
    /// information-preserving per-bin mean.
    pub fn mean_init(layout: &BinLayout) -> Self {
        let mut flat = vec![0.0; layout.n()];
        for j in 0..layout.bins() {
            let w = 1.0 / layout.width(j) as f64;
            for v in &mut flat[layout.token_range(j)] {
                *v = w;
            }
        }
        BinWeights { flat }
    }

    pub fn zeros(layout: &BinLayout) -> Self {
        BinWeights {
            flat: vec![0.0; layout.n()],
        }
    }

    pub fn from_flat(layout: &BinLayout, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != layout.n() {
            return Err(Error::ShapeMismatch {
                op: "bin_weights",
                left: (layout.n(), 1),
                right: (flat.len(), 1),
            });
        }
        Ok(BinWeights { flat })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    /// Weight vector of bin j (0-based).
    pub fn bin<'a>(&'a self, layout: &BinLayout, j: usize) -> &'a [f64] {
        &self.flat[layout.token_range(j)]
    }
}

fn check_binning_shapes(e: &Matrix, layout: &BinLayout, weights: &[f64]) -> Result<()> {
    if e.rows() != layout.n() {
        return Err(Error::ShapeMismatch {
            op: "apply_binning",
            left: (layout.n(), e.cols()),
            right: e.shape(),
        });
    }
    if weights.len() != layout.n() {
        return Err(Error::ShapeMismatch {
            op: "apply_binning weights",
            left: (layout.n(), 1),
            right: (weights.len(), 1),
        });
    }
    Ok(())
}

/// Collapse an n x d embedding to z x d: row j is the weighted combination
/// of the embedding rows inside bin j.
pub fn apply_binning(e: &Matrix, layout: &BinLayout, w: &BinWeights) -> Result<Matrix> {
    apply_binning_flat(e, layout, w.as_slice())
}

pub(crate) fn apply_binning_flat(e: &Matrix, layout: &BinLayout, weights: &[f64]) -> Result<Matrix> {
    check_binning_shapes(e, layout, weights)?;
    let d = e.cols();
    let mut out = Matrix::zeros(layout.bins(), d);
    for j in 0..layout.bins() {
        let range = layout.token_range(j);
        let out_row = out.row_mut(j);
        for i in range {
            let wi = weights[i];
            for (o, &ei) in out_row.iter_mut().zip(e.row(i).iter()) {
                *o += wi * ei;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`apply_binning`]: returns gradients with respect to the
/// embedding rows and to the bin weights.
///
/// grad_e[i] = w[i] * grad_out[bin(i)]; grad_w[i] = <e[i], grad_out[bin(i)]>.
pub fn binning_backward(
    grad_out: &Matrix,
    e: &Matrix,
    layout: &BinLayout,
    w: &BinWeights,
) -> Result<(Matrix, BinWeights)> {
    let (grad_e, grad_flat) = binning_backward_flat(grad_out, e, layout, w.as_slice())?;
    Ok((grad_e, BinWeights { flat: grad_flat }))
}

pub(crate) fn binning_backward_flat(
    grad_out: &Matrix,
    e: &Matrix,
    layout: &BinLayout,
    weights: &[f64],
) -> Result<(Matrix, Vec<f64>)> {
    check_binning_shapes(e, layout, weights)?;
    if grad_out.shape() != (layout.bins(), e.cols()) {
        return Err(Error::ShapeMismatch {
            op: "binning_backward",
            left: (layout.bins(), e.cols()),
            right: grad_out.shape(),
        });
    }
    let d = e.cols();
    let mut grad_e = Matrix::zeros(layout.n(), d);
    let mut grad_w = vec![0.0; layout.n()];
    for j in 0..layout.bins() {
        let g_row = grad_out.row(j);
        for i in layout.token_range(j) {
            let e_row = e.row(i);
            let ge_row = grad_e.row_mut(i);
            let mut dot = 0.0;
            for c in 0..d {
                ge_row[c] = weights[i] * g_row[c];
                dot += e_row[c] * g_row[c];
            }
            grad_w[i] = dot;
        }
    }
    Ok((grad_e, grad_w))
}

/// Identity binning: a uniform layout with one token per bin. With unit
/// weights, [`apply_binning`] is then the identity map.
pub fn identity_layout(n: usize) -> Result<BinLayout> {
    uniform_layout(n, n)
}
