//! Dense row-major matrix and the small kernel set everything else composes.
//!
//! All reductions run in a fixed left-to-right order so that repeated runs
//! on the same machine are bitwise identical. Operations validate that their
//! results stay finite; a NaN or infinity surfaces as an error instead of
//! propagating.

use crate::error::{Error, Result};

/// Dense 2-D matrix of f64 values in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    left: (1, c),
                    right: (1, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    /// Column vector from a slice.
    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    /// Row vector from a slice.
    pub fn row_vector(values: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Element-wise accumulation, used to sum per-sample gradients.
    pub fn add_in_place(&mut self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add_in_place",
                left: self.shape(),
                right: other.shape(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Standard matrix product with a fixed left-to-right summation over the
/// inner dimension.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let a_row = &a.data[i * k..(i + 1) * k];
        let out_row = &mut out.data[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b.data[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_ip * b_pj;
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite { op: "matmul" });
    }
    Ok(out)
}

/// Row-wise softmax with per-row max subtraction for stability.
pub fn softmax_rows(m: &Matrix) -> Result<Matrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite { op: "softmax_rows" });
    }
    let mut out = m.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Adjoint of [`softmax_rows`]: given upstream gradients and the softmax
/// output, returns gradients with respect to the logits.
///
/// Per row: dl_j = s_j * (ds_j - sum_k ds_k * s_k).
pub fn softmax_rows_backward(grad_out: &Matrix, softmax_out: &Matrix) -> Result<Matrix> {
    if grad_out.shape() != softmax_out.shape() {
        return Err(Error::ShapeMismatch {
            op: "softmax_rows_backward",
            left: grad_out.shape(),
            right: softmax_out.shape(),
        });
    }
    let mut out = Matrix::zeros(grad_out.rows, grad_out.cols);
    for r in 0..grad_out.rows {
        let g = grad_out.row(r);
        let s = softmax_out.row(r);
        let dot: f64 = g.iter().zip(s.iter()).map(|(&gi, &si)| gi * si).sum();
        for (o, (&gi, &si)) in out.row_mut(r).iter_mut().zip(g.iter().zip(s.iter())) {
            *o = si * (gi - dot);
        }
    }
    Ok(out)
}

/// Per-row statistics cached by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    /// Normalized rows before gain/bias, (x - mean) / sqrt(var + eps).
    pub normalized: Matrix,
    /// 1 / sqrt(var + eps) per row.
    pub inv_std: Vec<f64>,
}

/// Row-wise layer normalization: subtract the row mean, divide by
/// sqrt(population variance + eps), scale by gain, shift by bias.
pub fn layer_norm(m: &Matrix, gain: &Matrix, bias: &Matrix, eps: f64) -> Result<Matrix> {
    layer_norm_cached(m, gain, bias, eps).map(|(out, _)| out)
}

/// [`layer_norm`] that also returns the cache needed by the backward pass.
pub fn layer_norm_cached(
    m: &Matrix,
    gain: &Matrix,
    bias: &Matrix,
    eps: f64,
) -> Result<(Matrix, LayerNormCache)> {
    if gain.shape() != (1, m.cols) {
        return Err(Error::ShapeMismatch {
            op: "layer_norm gain",
            left: (1, m.cols),
            right: gain.shape(),
        });
    }
    if bias.shape() != (1, m.cols) {
        return Err(Error::ShapeMismatch {
            op: "layer_norm bias",
            left: (1, m.cols),
            right: bias.shape(),
        });
    }
    if eps <= 0.0 {
        return Err(Error::InvalidConfig(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let d = m.cols as f64;
    let mut normalized = Matrix::zeros(m.rows, m.cols);
    let mut out = Matrix::zeros(m.rows, m.cols);
    let mut inv_std = Vec::with_capacity(m.rows);
    for r in 0..m.rows {
        let row = m.row(r);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        for c in 0..m.cols {
            let norm = (row[c] - mean) * is;
            normalized[(r, c)] = norm;
            out[(r, c)] = norm * gain[(0, c)] + bias[(0, c)];
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite { op: "layer_norm" });
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Adjoint of [`layer_norm`]: returns (d_input, d_gain, d_bias).
pub fn layer_norm_backward(
    grad_out: &Matrix,
    cache: &LayerNormCache,
    gain: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let norm = &cache.normalized;
    if grad_out.shape() != norm.shape() {
        return Err(Error::ShapeMismatch {
            op: "layer_norm_backward",
            left: grad_out.shape(),
            right: norm.shape(),
        });
    }
    let (rows, cols) = norm.shape();
    let d = cols as f64;
    let mut d_input = Matrix::zeros(rows, cols);
    let mut d_gain = Matrix::zeros(1, cols);
    let mut d_bias = Matrix::zeros(1, cols);
    for r in 0..rows {
        let g = grad_out.row(r);
        let x_hat = norm.row(r);
        // Gradients through the normalized value.
        let mut d_hat = vec![0.0; cols];
        for c in 0..cols {
            d_gain[(0, c)] += g[c] * x_hat[c];
            d_bias[(0, c)] += g[c];
            d_hat[c] = g[c] * gain[(0, c)];
        }
        let mean_d_hat = d_hat.iter().sum::<f64>() / d;
        let mean_d_hat_x: f64 = d_hat
            .iter()
            .zip(x_hat.iter())
            .map(|(&dh, &xh)| dh * xh)
            .sum::<f64>()
            / d;
        let is = cache.inv_std[r];
        for c in 0..cols {
            d_input[(r, c)] = is * (d_hat[c] - mean_d_hat - x_hat[c] * mean_d_hat_x);
        }
    }
    Ok((d_input, d_gain, d_bias))
}
