//! Synthetic co-located sensor-pair generator.
//!
//! One shared reference series per feature (two sinusoids — daily and
//! sub-daily — plus a slow mean-reverting random walk, clipped at zero)
//! drives every sensor. Each low-cost sensor then reads a distorted
//! version of it:
//!
//!   x(t) = a·y(t) + b·y(t)² + c + d·sin(2π t / P_drift + φ) + ε(t)
//!
//! with per-sensor coefficients drawn from narrow documented ranges and
//! heteroscedastic noise ε ~ N(0, (σ₀ + σ₁·y)²). The quadratic term makes
//! purely linear calibration provably suboptimal while the narrow
//! coefficient ranges keep the distortion family transferable across
//! sensors, so a model trained on some sensors can calibrate an unseen
//! one. A sprinkle of missing cells and spikes exercises the cleaning
//! stage. Output is a pure function of the configuration: same seed,
//! same bytes.

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::csv_io::CSV_HEADER;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of co-located low-cost sensors (>= 3 so a sensor-wise split
    /// exists).
    pub sensors: usize,
    /// Readings per sensor, one per minute.
    pub len: usize,
    /// Per-sensor linear gain range.
    pub gain: (f64, f64),
    /// Per-sensor quadratic distortion range.
    pub curvature: (f64, f64),
    /// Per-sensor constant offset range.
    pub offset: (f64, f64),
    /// Per-sensor seasonal drift amplitude range (weekly period).
    pub drift: (f64, f64),
    /// Noise floor σ₀ and slope σ₁ of the heteroscedastic term.
    pub noise_base: f64,
    pub noise_slope: f64,
    /// Probability that a low-cost cell is written empty.
    pub missing_rate: f64,
    /// Probability that a low-cost cell is written as a 6x spike.
    pub spike_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            sensors: 4,
            len: 20_000,
            gain: (1.28, 1.36),
            curvature: (0.030, 0.036),
            offset: (1.2, 2.0),
            drift: (0.6, 1.0),
            noise_base: 0.5,
            noise_slope: 0.015,
            missing_rate: 0.002,
            spike_rate: 0.0005,
        }
    }
}

/// Per-feature shape of the shared reference signal.
struct FeatureShape {
    base: f64,
    daily_amp: f64,
    fast_amp: f64,
    walk_sigma: f64,
}

const SHAPES: [FeatureShape; 3] = [
    // pm10
    FeatureShape { base: 21.0, daily_amp: 14.0, fast_amp: 6.5, walk_sigma: 0.16 },
    // pm2_5
    FeatureShape { base: 12.6, daily_amp: 8.4, fast_amp: 3.9, walk_sigma: 0.096 },
    // pm1
    FeatureShape { base: 7.4, daily_amp: 4.9, fast_amp: 2.3, walk_sigma: 0.056 },
];

const DAILY_PERIOD: f64 = 1440.0;
const FAST_PERIOD: f64 = 240.0;
const DRIFT_PERIOD: f64 = 10_080.0;
/// Mean reversion of the reference random walk.
const WALK_RHO: f64 = 0.9995;

struct SensorCoeffs {
    gain: f64,
    curvature: f64,
    offset: f64,
    drift_amp: f64,
    drift_phase: f64,
}

fn sample_range(rng: &mut ChaCha20Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Generate the full CSV (header plus one row per sensor per minute) as a
/// string. Deterministic in the configuration.
pub fn synth_generate(config: &SynthConfig) -> Result<String> {
    if config.sensors < 3 {
        return Err(Error::TooFewSensors { found: config.sensors });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    // Shared reference series, one per feature.
    let mut phases = Vec::new();
    for _ in 0..SHAPES.len() {
        let p1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let p2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        phases.push((p1, p2));
    }
    let mut references: Vec<Vec<f64>> = Vec::with_capacity(SHAPES.len());
    for (shape, (p1, p2)) in SHAPES.iter().zip(phases.iter()) {
        let walk_step = Normal::new(0.0, shape.walk_sigma).expect("positive sigma");
        let mut walk = 0.0;
        let series = (0..config.len)
            .map(|t| {
                walk = WALK_RHO * walk + walk_step.sample(&mut rng);
                let tt = t as f64;
                let value = shape.base
                    + shape.daily_amp * (std::f64::consts::TAU * tt / DAILY_PERIOD + p1).sin()
                    + shape.fast_amp * (std::f64::consts::TAU * tt / FAST_PERIOD + p2).sin()
                    + walk;
                value.max(0.0)
            })
            .collect();
        references.push(series);
    }

    // Per-sensor distortion coefficients (shared across features — a real
    // device's bias correlates across PM fractions).
    let coeffs: Vec<SensorCoeffs> = (0..config.sensors)
        .map(|_| SensorCoeffs {
            gain: sample_range(&mut rng, config.gain),
            curvature: sample_range(&mut rng, config.curvature),
            offset: sample_range(&mut rng, config.offset),
            drift_amp: sample_range(&mut rng, config.drift),
            drift_phase: rng.gen_range(0.0..std::f64::consts::TAU),
        })
        .collect();

    let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let mut out = String::with_capacity(config.sensors * config.len * 72 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");
    for (s, c) in coeffs.iter().enumerate() {
        let sensor_id = format!("s{:02}", s + 1);
        for t in 0..config.len {
            let timestamp = start + chrono::Duration::minutes(t as i64);
            let drift = c.drift_amp
                * (std::f64::consts::TAU * t as f64 / DRIFT_PERIOD + c.drift_phase).sin();
            let mut cells: Vec<Option<f64>> = Vec::with_capacity(6);
            // Low-cost readings for pm10, pm2_5, pm1.
            for series in &references {
                let y = series[t];
                let sigma = config.noise_base + config.noise_slope * y;
                let noise = if sigma > 0.0 {
                    sigma * unit_normal.sample(&mut rng)
                } else {
                    0.0
                };
                let x = c.gain * y + c.curvature * y * y + c.offset + drift + noise;
                let missing = config.missing_rate > 0.0 && rng.gen::<f64>() < config.missing_rate;
                let spike = config.spike_rate > 0.0 && rng.gen::<f64>() < config.spike_rate;
                cells.push(if missing {
                    None
                } else if spike {
                    Some((x * 6.0).max(0.0))
                } else {
                    Some(x.max(0.0))
                });
            }
            for series in &references {
                cells.push(Some(series[t]));
            }
            out.push_str(&timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string());
            out.push(',');
            out.push_str(&sensor_id);
            for cell in cells {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format!("{v:.3}"));
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}
