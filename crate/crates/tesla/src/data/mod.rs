//! Sensor data pipeline: CSV ingestion, cleaning, sensor-wise splitting,
//! window extraction, and a synthetic-pair generator for desk-scale
//! experiments.
//!
//! The flow is load_csv → clean → split_by_sensor → make_windows. Each
//! stage is pure; cleaning additionally returns a per-sensor discard
//! report so removal decisions stay auditable.

mod clean;
mod csv_io;
mod split;
mod synth;
mod window;

pub use clean::{clean, DiscardEntry, OUTLIER_CAP, OUTLIER_MAD_FACTOR, ROLLING_MEDIAN_WIDTH};
pub use csv_io::{load_csv, load_csv_str, CSV_HEADER};
pub use split::split_by_sensor;
pub use synth::{synth_generate, SynthConfig};
pub use window::{make_windows, GAP_TOLERANCE};

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

/// Measured particulate feature; selects one low-cost/reference column
/// pair from the CSV schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Pm10,
    Pm2_5,
    Pm1,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Pm10, Feature::Pm2_5, Feature::Pm1];

    pub(crate) fn column_pair(&self) -> (&'static str, &'static str) {
        match self {
            Feature::Pm10 => ("lowcost_pm10", "ref_pm10"),
            Feature::Pm2_5 => ("lowcost_pm2_5", "ref_pm2_5"),
            Feature::Pm1 => ("lowcost_pm1", "ref_pm1"),
        }
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Feature::Pm10 => "pm10",
            Feature::Pm2_5 => "pm2_5",
            Feature::Pm1 => "pm1",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pm10" => Ok(Feature::Pm10),
            "pm2_5" | "pm2.5" => Ok(Feature::Pm2_5),
            "pm1" => Ok(Feature::Pm1),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature '{other}' (expected pm10, pm2_5, or pm1)"
            ))),
        }
    }
}

/// One row of one sensor for one feature. `None` marks an invalid cell
/// (empty or unparseable) — never silently zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorRecord {
    pub timestamp: DateTime<Utc>,
    pub sensor_id: String,
    pub feature: Feature,
    pub lowcost: Option<f64>,
    pub reference: Option<f64>,
}

/// Cleaned, aligned low-cost/reference series for one sensor and feature.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPair {
    pub sensor_id: String,
    pub feature: Feature,
    pub timestamps: Vec<DateTime<Utc>>,
    /// Low-cost readings.
    pub x: Vec<f64>,
    /// Reference readings, aligned with `x`.
    pub y: Vec<f64>,
    /// Granularity: the minimum gap between consecutive kept timestamps.
    pub granularity: chrono::Duration,
}

impl SeriesPair {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// One training/evaluation sample: the n most recent low-cost readings and
/// the co-timed reference value.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub window: Vec<f64>,
    pub target: f64,
    pub sensor_id: String,
    pub timestamp: DateTime<Utc>,
}

/// Sensor-wise split: alphabetically last sensor is the test set, the
/// second-to-last is validation, everything before trains.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitPlan {
    pub train: Vec<String>,
    pub validation: String,
    pub test: String,
}
