//! CSV ingestion.
//!
//! Schema (UTF-8, comma-separated, one header row):
//!   timestamp,sensor_id,lowcost_pm10,lowcost_pm2_5,lowcost_pm1,ref_pm10,ref_pm2_5,ref_pm1
//!
//! Timestamps are ISO-8601 at minute granularity. Empty or unparseable
//! numeric cells become invalid markers — bad data must never read as a
//! silent zero. Structural problems (missing columns, duplicate or
//! backwards timestamps within a sensor) are hard errors.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};

use super::{Feature, SensorRecord};

pub const CSV_HEADER: &str =
    "timestamp,sensor_id,lowcost_pm10,lowcost_pm2_5,lowcost_pm1,ref_pm10,ref_pm2_5,ref_pm1";

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

fn parse_cell(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return None;
    }
    trimmed.parse::<f64>().ok()
}

/// Read the schema CSV from a file and extract one feature's records.
pub fn load_csv(path: &Path, feature: Feature) -> Result<Vec<SensorRecord>> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, feature)
}

/// Same as [`load_csv`] on in-memory text.
pub fn load_csv_str(text: &str, feature: Feature) -> Result<Vec<SensorRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, message: e.to_string() })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_col = col("timestamp")?;
    let id_col = col("sensor_id")?;
    let (lc_name, ref_name) = feature.column_pair();
    let lc_col = col(lc_name)?;
    let ref_col = col(ref_name)?;

    let mut records = Vec::new();
    // Last timestamp seen per sensor, for strict-ordering checks.
    let mut last_seen: HashMap<String, DateTime<Utc>> = HashMap::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
        let field = |c: usize| -> Result<&str> {
            row.get(c).ok_or_else(|| Error::MalformedRow {
                line,
                message: format!("row has {} fields, expected at least {}", row.len(), c + 1),
            })
        };
        let raw_ts = field(ts_col)?;
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| Error::MalformedRow {
            line,
            message: format!("unparseable timestamp '{raw_ts}'"),
        })?;
        let sensor_id = field(id_col)?.trim().to_string();
        if sensor_id.is_empty() {
            return Err(Error::MalformedRow { line, message: "empty sensor_id".to_string() });
        }
        match last_seen.get(&sensor_id) {
            Some(prev) if *prev == timestamp => {
                return Err(Error::DuplicateTimestamp {
                    sensor: sensor_id,
                    timestamp: raw_ts.to_string(),
                });
            }
            Some(prev) if *prev > timestamp => {
                return Err(Error::OutOfOrderTimestamps {
                    sensor: sensor_id,
                    timestamp: raw_ts.to_string(),
                });
            }
            _ => {}
        }
        last_seen.insert(sensor_id.clone(), timestamp);

        records.push(SensorRecord {
            timestamp,
            sensor_id,
            feature,
            lowcost: parse_cell(field(lc_col)?),
            reference: parse_cell(field(ref_col)?),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(body: &str) -> String {
        format!("{CSV_HEADER}\n{body}")
    }

    #[test]
    fn well_formed_file_parses_every_row() {
        let text = rows(
            "2024-01-01T00:00:00Z,s01,10.5,6.2,3.1,9.8,5.9,2.8\n\
             2024-01-01T00:01:00Z,s01,11.0,6.4,3.2,10.1,6.0,2.9\n\
             2024-01-01T00:02:00Z,s01,10.8,6.3,3.0,9.9,5.8,2.7",
        );
        let recs = load_csv_str(&text, Feature::Pm10).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].lowcost, Some(10.5));
        assert_eq!(recs[0].reference, Some(9.8));
        assert_eq!(recs[2].sensor_id, "s01");
    }

    #[test]
    fn feature_selects_its_column_pair() {
        let text = rows("2024-01-01T00:00:00Z,s01,10.5,6.2,3.1,9.8,5.9,2.8");
        let recs = load_csv_str(&text, Feature::Pm2_5).unwrap();
        assert_eq!(recs[0].lowcost, Some(6.2));
        assert_eq!(recs[0].reference, Some(5.9));
        let recs = load_csv_str(&text, Feature::Pm1).unwrap();
        assert_eq!(recs[0].lowcost, Some(3.1));
        assert_eq!(recs[0].reference, Some(2.8));
    }

    #[test]
    fn empty_cell_becomes_invalid_marker() {
        let text = rows("2024-01-01T00:00:00Z,s01,,6.2,3.1,9.8,5.9,2.8");
        let recs = load_csv_str(&text, Feature::Pm10).unwrap();
        assert_eq!(recs[0].lowcost, None);
        assert_eq!(recs[0].reference, Some(9.8));
    }

    #[test]
    fn unparseable_cell_becomes_invalid_marker_not_zero() {
        let text = rows("2024-01-01T00:00:00Z,s01,garbage,6.2,3.1,9.8,5.9,2.8");
        let recs = load_csv_str(&text, Feature::Pm10).unwrap();
        assert_eq!(recs[0].lowcost, None);
    }

    #[test]
    fn missing_column_is_reported_by_name() {
        let text = "timestamp,sensor_id,lowcost_pm10\n2024-01-01T00:00:00Z,s01,10.5";
        let err = load_csv_str(text, Feature::Pm10).unwrap_err();
        assert_eq!(err.code(), "missing_column");
        assert!(err.to_string().contains("ref_pm10"));
    }

    #[test]
    fn out_of_order_timestamps_name_the_sensor() {
        let text = rows(
            "2024-01-01T00:05:00Z,s01,10.5,6.2,3.1,9.8,5.9,2.8\n\
             2024-01-01T00:04:00Z,s01,11.0,6.4,3.2,10.1,6.0,2.9",
        );
        let err = load_csv_str(&text, Feature::Pm10).unwrap_err();
        assert_eq!(err.code(), "out_of_order_timestamps");
        assert!(err.to_string().contains("s01"));
    }

    #[test]
    fn duplicate_timestamp_is_an_error() {
        let text = rows(
            "2024-01-01T00:05:00Z,s01,10.5,6.2,3.1,9.8,5.9,2.8\n\
             2024-01-01T00:05:00Z,s01,11.0,6.4,3.2,10.1,6.0,2.9",
        );
        let err = load_csv_str(&text, Feature::Pm10).unwrap_err();
        assert_eq!(err.code(), "duplicate_timestamp");
    }

    #[test]
    fn interleaved_sensors_keep_independent_ordering() {
        let text = rows(
            "2024-01-01T00:00:00Z,s01,1,1,1,1,1,1\n\
             2024-01-01T00:00:00Z,s02,2,2,2,2,2,2\n\
             2024-01-01T00:01:00Z,s01,3,3,3,3,3,3\n\
             2024-01-01T00:01:00Z,s02,4,4,4,4,4,4",
        );
        let recs = load_csv_str(&text, Feature::Pm10).unwrap();
        assert_eq!(recs.len(), 4);
    }

    #[test]
    fn naive_timestamps_are_accepted_as_utc() {
        let text = rows("2024-01-01T00:00:00,s01,1,1,1,1,1,1");
        let recs = load_csv_str(&text, Feature::Pm10).unwrap();
        assert_eq!(
            recs[0].timestamp,
            DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").unwrap()
        );
    }

    #[test]
    fn bad_timestamp_is_malformed_row_with_line_number() {
        let text = rows("not-a-time,s01,1,1,1,1,1,1");
        let err = load_csv_str(&text, Feature::Pm10).unwrap_err();
        assert_eq!(err.code(), "malformed_row");
        assert!(err.to_string().contains("line 2"));
    }
}
