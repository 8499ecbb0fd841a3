//! Central finite-difference gradient oracle.
//!
//! Used by the test suites to validate every hand-derived backward pass,
//! so it deliberately shares no code with the analytic paths it checks.

use crate::error::{Error, Result};

/// Central-difference gradient estimate of a scalar function at `theta`:
/// (f(theta + h e_i) - f(theta - h e_i)) / (2h) per coordinate.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "finite_diff_grad step must be > 0, got {h}"
        )));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let plus = f(&probe)?;
        probe[i] = theta[i] - h;
        let minus = f(&probe)?;
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                op: "finite_diff_grad",
            });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
