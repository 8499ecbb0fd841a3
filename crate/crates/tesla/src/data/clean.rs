//! Data cleaning: validity filtering, robust outlier removal, and the
//! half-gone discard rule.
//!
//! A reading pair survives when both sides are present, finite, and
//! nonnegative, neither side exceeds the physical cap, and neither side
//! deviates from its rolling median by more than five rolling MADs. A
//! sensor that loses more than half of its rows is discarded outright;
//! every decision is tallied in the returned report.

use std::collections::BTreeMap;

use chrono::Duration;

use crate::error::Result;

use super::{SensorRecord, SeriesPair};

/// Centered rolling-median window width.
pub const ROLLING_MEDIAN_WIDTH: usize = 11;
/// A reading is an outlier when |value − median| > this factor × MAD.
pub const OUTLIER_MAD_FACTOR: f64 = 5.0;
/// Physical cap in µg/m³; readings above it are always outliers.
pub const OUTLIER_CAP: f64 = 1000.0;

/// Per-sensor cleaning outcome.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DiscardEntry {
    pub sensor_id: String,
    pub kept: usize,
    pub removed: usize,
    pub discarded: bool,
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Flags for each value: true when it deviates from the centered rolling
/// median (width [`ROLLING_MEDIAN_WIDTH`], truncated at the edges) by more
/// than [`OUTLIER_MAD_FACTOR`] rolling MADs, or exceeds [`OUTLIER_CAP`].
fn outlier_flags(values: &[f64]) -> Vec<bool> {
    let n = values.len();
    let half = ROLLING_MEDIAN_WIDTH / 2;
    (0..n)
        .map(|i| {
            if values[i] > OUTLIER_CAP {
                return true;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mut window: Vec<f64> = values[lo..hi].to_vec();
            let med = median(&mut window);
            let mut deviations: Vec<f64> = window.iter().map(|v| (v - med).abs()).collect();
            let mad = median(&mut deviations);
            (values[i] - med).abs() > OUTLIER_MAD_FACTOR * mad
        })
        .collect()
}

/// Minimum gap between consecutive timestamps; falls back to one minute
/// for series too short to have a gap.
fn granularity(timestamps: &[chrono::DateTime<chrono::Utc>]) -> Duration {
    timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or_else(|| Duration::minutes(1))
}

/// Clean per-feature records into aligned series, one per surviving
/// sensor, plus the per-sensor report.
pub fn clean(records: &[SensorRecord]) -> Result<(Vec<SeriesPair>, Vec<DiscardEntry>)> {
    // Group rows per sensor; BTreeMap keeps the output ordering stable.
    let mut groups: BTreeMap<&str, Vec<&SensorRecord>> = BTreeMap::new();
    for rec in records {
        groups.entry(&rec.sensor_id).or_default().push(rec);
    }

    let mut pairs = Vec::new();
    let mut report = Vec::new();
    for (sensor_id, rows) in groups {
        let total = rows.len();

        // Validity pass: both sides present, finite, nonnegative.
        let valid: Vec<&SensorRecord> = rows
            .into_iter()
            .filter(|r| {
                matches!((r.lowcost, r.reference), (Some(x), Some(y))
                    if x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0)
            })
            .collect();

        // Outlier pass on each side of the surviving rows.
        let xs: Vec<f64> = valid.iter().map(|r| r.lowcost.unwrap()).collect();
        let ys: Vec<f64> = valid.iter().map(|r| r.reference.unwrap()).collect();
        let x_out = outlier_flags(&xs);
        let y_out = outlier_flags(&ys);

        let mut timestamps = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in valid.iter().enumerate() {
            if !x_out[i] && !y_out[i] {
                timestamps.push(rec.timestamp);
                x.push(xs[i]);
                y.push(ys[i]);
            }
        }

        let kept = x.len();
        let removed = total - kept;
        let discarded = removed * 2 > total;
        report.push(DiscardEntry {
            sensor_id: sensor_id.to_string(),
            kept,
            removed,
            discarded,
        });
        if discarded {
            continue;
        }
        let feature = valid
            .first()
            .map(|r| r.feature)
            .unwrap_or(super::Feature::Pm10);
        pairs.push(SeriesPair {
            sensor_id: sensor_id.to_string(),
            feature,
            granularity: granularity(&timestamps),
            timestamps,
            x,
            y,
        });
    }
    Ok((pairs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;
    use chrono::{TimeZone, Utc};

    fn record(minute: i64, sensor: &str, x: Option<f64>, y: Option<f64>) -> SensorRecord {
        SensorRecord {
            timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
                + chrono::Duration::minutes(minute),
            sensor_id: sensor.to_string(),
            feature: Feature::Pm10,
            lowcost: x,
            reference: y,
        }
    }

    fn smooth_series(sensor: &str, len: usize) -> Vec<SensorRecord> {
        (0..len)
            .map(|i| {
                let v = 20.0 + (i as f64 * 0.3).sin() * 4.0;
                record(i as i64, sensor, Some(v), Some(v * 0.9))
            })
            .collect()
    }

    #[test]
    fn all_valid_sensor_passes_through_unchanged() {
        let recs = smooth_series("s01", 40);
        let (pairs, report) = clean(&recs).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].len(), 40);
        assert_eq!(report[0], DiscardEntry {
            sensor_id: "s01".to_string(),
            kept: 40,
            removed: 0,
            discarded: false,
        });
    }

    #[test]
    fn invalid_rows_are_dropped() {
        let mut recs = smooth_series("s01", 30);
        recs[3].lowcost = None;
        recs[7].reference = Some(f64::NAN);
        recs[11].lowcost = Some(-2.0);
        let (pairs, report) = clean(&recs).unwrap();
        assert_eq!(pairs[0].len(), 27);
        assert_eq!(report[0].removed, 3);
    }

    #[test]
    fn majority_invalid_sensor_is_discarded_but_reported() {
        let mut recs = smooth_series("s01", 30);
        for r in recs.iter_mut().take(18) {
            r.lowcost = None;
        }
        let (pairs, report) = clean(&recs).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(report.len(), 1);
        assert!(report[0].discarded);
        assert_eq!(report[0].kept, 12);
        assert_eq!(report[0].removed, 18);
    }

    #[test]
    fn exactly_half_removed_is_kept() {
        let mut recs = smooth_series("s01", 30);
        for r in recs.iter_mut().take(15) {
            r.lowcost = None;
        }
        let (pairs, report) = clean(&recs).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!(!report[0].discarded);
    }

    #[test]
    fn spike_far_above_rolling_median_is_removed() {
        let mut recs = smooth_series("s01", 41);
        // One reading at ~10x the local level.
        recs[20].lowcost = Some(200.0);
        let (pairs, report) = clean(&recs).unwrap();
        assert_eq!(pairs[0].len(), 40);
        assert_eq!(report[0].removed, 1);
        assert!(pairs[0].x.iter().all(|&v| v < 100.0));
    }

    #[test]
    fn readings_above_physical_cap_are_removed() {
        let mut recs = smooth_series("s01", 30);
        recs[5].reference = Some(1500.0);
        let (pairs, _) = clean(&recs).unwrap();
        assert_eq!(pairs[0].len(), 29);
    }

    #[test]
    fn granularity_is_minimum_consecutive_gap() {
        // Gaps: 1, 1, 4, 2 minutes -> granularity 1.
        let recs = vec![
            record(0, "s01", Some(1.0), Some(1.0)),
            record(1, "s01", Some(1.0), Some(1.0)),
            record(2, "s01", Some(1.0), Some(1.0)),
            record(6, "s01", Some(1.0), Some(1.0)),
            record(8, "s01", Some(1.0), Some(1.0)),
        ];
        let (pairs, _) = clean(&recs).unwrap();
        assert_eq!(pairs[0].granularity, chrono::Duration::minutes(1));
    }

    #[test]
    fn sensors_emerge_in_alphabetical_order() {
        let mut recs = smooth_series("s02", 20);
        recs.extend(smooth_series("s01", 20));
        let (pairs, report) = clean(&recs).unwrap();
        assert_eq!(pairs[0].sensor_id, "s01");
        assert_eq!(pairs[1].sensor_id, "s02");
        assert_eq!(report[0].sensor_id, "s01");
    }

    #[test]
    fn empty_input_produces_empty_output() {
        let (pairs, report) = clean(&[]).unwrap();
        assert!(pairs.is_empty());
        assert!(report.is_empty());
    }

    #[test]
    fn cleaning_never_adds_readings() {
        let mut recs = smooth_series("s01", 25);
        recs[1].lowcost = Some(999.0); // below cap, above 5 MAD
        let (pairs, report) = clean(&recs).unwrap();
        assert!(pairs[0].len() <= 25);
        assert_eq!(report[0].kept + report[0].removed, 25);
    }
}
