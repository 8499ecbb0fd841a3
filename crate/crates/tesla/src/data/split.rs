//! Sensor-wise train/validation/test split.
//!
//! Sensors are ordered alphabetically by id: the last becomes the test
//! set, the second-to-last validation, and the rest train. Splitting by
//! sensor (not by time) measures transfer to an unseen device, which is
//! the deployment scenario for fleet calibration.

use crate::error::{Error, Result};

use super::{SeriesPair, SplitPlan};

pub fn split_by_sensor(pairs: &[SeriesPair]) -> Result<SplitPlan> {
    let mut ids: Vec<String> = pairs.iter().map(|p| p.sensor_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::TooFewSensors { found: ids.len() });
    }
    let test = ids.pop().expect("len >= 3");
    let validation = ids.pop().expect("len >= 2");
    Ok(SplitPlan { train: ids, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;

    fn pair(id: &str) -> SeriesPair {
        SeriesPair {
            sensor_id: id.to_string(),
            feature: Feature::Pm10,
            timestamps: vec![],
            x: vec![],
            y: vec![],
            granularity: chrono::Duration::minutes(1),
        }
    }

    #[test]
    fn four_sensors_split_two_one_one() {
        let pairs = vec![pair("a"), pair("b"), pair("c"), pair("d")];
        let plan = split_by_sensor(&pairs).unwrap();
        assert_eq!(plan.train, vec!["a", "b"]);
        assert_eq!(plan.validation, "c");
        assert_eq!(plan.test, "d");
    }

    #[test]
    fn three_sensors_is_the_minimum() {
        let pairs = vec![pair("a"), pair("b"), pair("c")];
        let plan = split_by_sensor(&pairs).unwrap();
        assert_eq!(plan.train, vec!["a"]);
        assert_eq!(plan.validation, "b");
        assert_eq!(plan.test, "c");
    }

    #[test]
    fn two_sensors_is_an_error() {
        let pairs = vec![pair("a"), pair("b")];
        let err = split_by_sensor(&pairs).unwrap_err();
        assert_eq!(err.code(), "too_few_sensors");
    }

    #[test]
    fn ordering_is_alphabetical_not_positional() {
        let pairs = vec![pair("zz"), pair("aa"), pair("mm")];
        let plan = split_by_sensor(&pairs).unwrap();
        assert_eq!(plan.train, vec!["aa"]);
        assert_eq!(plan.validation, "mm");
        assert_eq!(plan.test, "zz");
    }

    #[test]
    fn split_partitions_the_sensor_set() {
        let ids = ["s1", "s2", "s3", "s4", "s5"];
        let pairs: Vec<SeriesPair> = ids.iter().map(|i| pair(i)).collect();
        let plan = split_by_sensor(&pairs).unwrap();
        let mut all = plan.train.clone();
        all.push(plan.validation.clone());
        all.push(plan.test.clone());
        all.sort();
        assert_eq!(all, ids);
    }
}
