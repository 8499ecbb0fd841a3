//! Mini-batch training loop and held-out evaluation.
//!
//! Inputs and targets are standardized with statistics fitted on the
//! training windows only; predictions are mapped back to physical units
//! before any metric is reported. Batches are drawn from a seeded shuffle
//! so a (seed, data, configuration) triple always produces bitwise
//! identical parameter trajectories and epoch traces. After every epoch
//! the model is scored on the validation split and the parameters from
//! the best validation-RMSE epoch are the ones returned.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::{CalibrationModel, Standardization};
use crate::numerics::AdamHyper;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seed for the epoch shuffles (model initialization has its own seed
    /// at construction).
    pub seed: u64,
    /// Recorded here so artifacts carry the full recipe; the live
    /// optimizer state sits inside the model, so construct the model with
    /// these same values.
    pub hyper: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, batch_size: 32, seed: 0, hyper: AdamHyper::default() }
    }
}

/// One row of the per-epoch trace. `train_mse` is measured in
/// standardized units (the quantity the optimizer actually descends);
/// validation metrics are in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_rmse: f64,
    pub val_mae: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    /// Render as CSV. All columns except `seconds` are deterministic for
    /// a fixed seed, data set and configuration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_rmse,val_mae,seconds\n");
        for row in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                row.epoch, row.train_mse, row.val_rmse, row.val_mae, row.seconds
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation RMSE.
    pub model: CalibrationModel,
    pub standardization: Standardization,
    pub trace: TrainTrace,
    pub best_epoch: usize,
}

/// Fit standardization statistics on the training windows: mean and
/// population standard deviation of all window readings for the input
/// side, of the targets for the output side. Degenerate (constant) data
/// keeps a unit scale so standardization stays invertible.
pub fn fit_standardization(samples: &[WindowSample]) -> Result<Standardization> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut x_sum = 0.0;
    let mut x_sq = 0.0;
    let mut x_count = 0.0;
    let mut y_sum = 0.0;
    let mut y_sq = 0.0;
    for sample in samples {
        for &v in &sample.window {
            x_sum += v;
            x_sq += v * v;
            x_count += 1.0;
        }
        y_sum += sample.target;
        y_sq += sample.target * sample.target;
    }
    let y_count = samples.len() as f64;
    let x_mean = x_sum / x_count;
    let y_mean = y_sum / y_count;
    let x_var = (x_sq / x_count - x_mean * x_mean).max(0.0);
    let y_var = (y_sq / y_count - y_mean * y_mean).max(0.0);
    let x_std = if x_var.sqrt() > 0.0 { x_var.sqrt() } else { 1.0 };
    let y_std = if y_var.sqrt() > 0.0 { y_var.sqrt() } else { 1.0 };
    Ok(Standardization { x_mean, x_std, y_mean, y_std })
}

/// Predict in physical units: standardize the raw window, run the model,
/// map the output back.
pub fn calibrated_prediction(
    model: &CalibrationModel,
    stats: &Standardization,
    window: &[f64],
) -> Result<f64> {
    let scaled = stats.scale_window(window);
    Ok(stats.descale_prediction(model.predict(&scaled)?))
}

/// Root-mean-square and mean-absolute error of paired predictions and
/// targets. Lengths must match and be nonzero.
pub fn rmse_and_mae(predictions: &[f64], targets: &[f64]) -> (f64, f64) {
    assert_eq!(predictions.len(), targets.len(), "paired metric inputs");
    assert!(!predictions.is_empty(), "metrics need at least one pair");
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (p, t) in predictions.iter().zip(targets.iter()) {
        let r = p - t;
        sq += r * r;
        abs += r.abs();
    }
    let count = predictions.len() as f64;
    ((sq / count).sqrt(), abs / count)
}

fn validation_metrics(
    model: &CalibrationModel,
    stats: &Standardization,
    samples: &[WindowSample],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut preds = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for sample in samples {
        preds.push(calibrated_prediction(model, stats, &sample.window)?);
        targets.push(sample.target);
    }
    Ok(rmse_and_mae(&preds, &targets))
}

/// Run the optimization loop. The returned model carries the parameters
/// of the epoch with the lowest validation RMSE (the final epoch when
/// validation never improves or is empty).
pub fn train(
    mut model: CalibrationModel,
    train: &[WindowSample],
    validation: &[WindowSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidConfig(
            "epochs and batch_size must be positive".to_string(),
        ));
    }
    let n = model.window_len();
    for sample in train.iter().chain(validation.iter()) {
        if sample.window.len() != n {
            return Err(Error::InvalidConfig(format!(
                "window of {} readings fed to a model expecting {n}",
                sample.window.len()
            )));
        }
    }

    let stats = fit_standardization(train)?;
    let scaled_train: Vec<(Vec<f64>, f64)> = train
        .iter()
        .map(|s| (stats.scale_window(&s.window), stats.scale_target(s.target)))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..scaled_train.len()).collect();
    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, CalibrationModel)> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            model.zero_grads();
            let mut batch_loss = 0.0;
            for &i in batch {
                let (window, target) = &scaled_train[i];
                batch_loss += model.accumulate(window, *target)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_index + 1 });
            }
            model.scale_grads(1.0 / batch.len() as f64);
            model.adam_sweep()?;
            loss_sum += batch_loss;
        }
        // accumulate() returns half squared residuals, so the mean squared
        // error over the epoch is twice the mean accumulated loss.
        let train_mse = 2.0 * loss_sum / scaled_train.len() as f64;
        let (val_rmse, val_mae) = validation_metrics(&model, &stats, validation)?;
        trace.epochs.push(EpochStats {
            epoch,
            train_mse,
            val_rmse,
            val_mae,
            seconds: started.elapsed().as_secs_f64(),
        });
        let improved = match &best {
            None => true,
            Some((best_rmse, _, _)) => val_rmse < *best_rmse,
        };
        if improved {
            best = Some((val_rmse, epoch, model.clone()));
        }
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { model: best_model, standardization: stats, trace, best_epoch })
}

/// Error metrics on a held-out split, in physical units, next to the
/// no-calibration baseline that reports the newest raw reading as the
/// prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub rmse_model: f64,
    pub mae_model: f64,
    pub rmse_raw: f64,
    pub mae_raw: f64,
}

pub fn evaluate(
    model: &CalibrationModel,
    stats: &Standardization,
    test: &[WindowSample],
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut preds = Vec::with_capacity(test.len());
    let mut raw = Vec::with_capacity(test.len());
    let mut targets = Vec::with_capacity(test.len());
    for sample in test {
        preds.push(calibrated_prediction(model, stats, &sample.window)?);
        raw.push(*sample.window.last().expect("windows are never empty"));
        targets.push(sample.target);
    }
    let (rmse_model, mae_model) = rmse_and_mae(&preds, &targets);
    let (rmse_raw, mae_raw) = rmse_and_mae(&raw, &targets);
    Ok(EvalReport { samples: test.len(), rmse_model, mae_model, rmse_raw, mae_raw })
}
