//! Versioned JSON checkpoints.
//!
//! A checkpoint is an inference artifact: variant tag, architecture
//! settings, the standardization statistics fitted on the training split,
//! and every parameter tensor as a named array with explicit shape.
//! Values round-trip bit-exactly (shortest-round-trip decimal encoding),
//! so save → load → save is byte-stable. Optimizer state is deliberately
//! not persisted.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{AdamHyper, Matrix};

use super::{CalibrationModel, TeslaConfig, Variant};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Input/output standardization fitted on the training split. Windows are
/// scaled to zero-mean/unit-variance before the model; predictions are
/// mapped back to physical units.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub x_mean: f64,
    pub x_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardization {
    pub fn identity() -> Self {
        Standardization { x_mean: 0.0, x_std: 1.0, y_mean: 0.0, y_std: 1.0 }
    }

    pub fn scale_window(&self, window: &[f64]) -> Vec<f64> {
        window.iter().map(|x| (x - self.x_mean) / self.x_std).collect()
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    pub fn descale_prediction(&self, yhat: f64) -> f64 {
        yhat * self.y_std + self.y_mean
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub config: TeslaConfig,
    pub standardization: Standardization,
    pub tensors: Vec<NamedTensor>,
    /// Full run configuration of the producing command, for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn from_model(
        model: &CalibrationModel,
        config: &TeslaConfig,
        standardization: Standardization,
        provenance: Option<serde_json::Value>,
    ) -> Self {
        let tensors = model
            .tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                rows: t.value.rows(),
                cols: t.value.cols(),
                data: t.value.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            variant: model.variant(),
            config: *config,
            standardization,
            tensors,
            provenance,
        }
    }

    /// Rebuild the model. Tensor names, order, and shapes must match the
    /// canonical layout for the stored variant and config exactly.
    pub fn to_model(&self, hyper: AdamHyper) -> Result<CalibrationModel> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::BadCheckpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !(self.standardization.x_std > 0.0 && self.standardization.y_std > 0.0) {
            return Err(Error::BadCheckpoint(
                "standardization stds must be positive".to_string(),
            ));
        }
        let mut model = CalibrationModel::new(self.variant, &self.config, 0, hyper)?;
        let expected: Vec<(String, (usize, usize))> = model
            .tensors()
            .iter()
            .map(|(name, t)| (name.to_string(), t.value.shape()))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::BadCheckpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (want, got) in expected.iter().zip(self.tensors.iter()) {
            if want.0 != got.name {
                return Err(Error::BadCheckpoint(format!(
                    "tensor '{}' out of place (expected '{}')",
                    got.name, want.0
                )));
            }
            if want.1 != (got.rows, got.cols) || got.data.len() != got.rows * got.cols {
                return Err(Error::BadCheckpoint(format!(
                    "tensor '{}' has shape {}x{} with {} values (expected {}x{})",
                    got.name,
                    got.rows,
                    got.cols,
                    got.data.len(),
                    want.1 .0,
                    want.1 .1
                )));
            }
            if got.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadCheckpoint(format!(
                    "tensor '{}' contains non-finite values",
                    got.name
                )));
            }
        }
        for (slot, stored) in model.tensors_mut().into_iter().zip(self.tensors.iter()) {
            slot.value =
                Matrix::from_vec(stored.rows, stored.cols, stored.data.clone())?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        Ok(ckpt)
    }
}
