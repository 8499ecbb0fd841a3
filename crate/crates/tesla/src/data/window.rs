//! Sliding-window extraction.
//!
//! One sample per position i >= n: the window of the n most recent
//! low-cost readings paired with the reference value at the window's end.
//! Windows that straddle a timestamp gap larger than GAP_TOLERANCE times
//! the series granularity are skipped — readings separated by a long
//! outage are not a coherent recent history, even though the index-based
//! window definition would happily span them.

use crate::error::{Error, Result};

use super::{SeriesPair, WindowSample};

/// Maximum tolerated gap between consecutive readings inside one window,
/// as a multiple of the series granularity.
pub const GAP_TOLERANCE: i64 = 3;

pub fn make_windows(pair: &SeriesPair, n: usize) -> Result<Vec<WindowSample>> {
    if n < 2 {
        return Err(Error::WindowTooSmall { n });
    }
    let len = pair.len();
    if len < n {
        return Ok(Vec::new());
    }
    let max_gap = pair.granularity * GAP_TOLERANCE as i32;

    // gap_ok[i] = the step from reading i to reading i+1 is small enough.
    let gap_ok: Vec<bool> = pair
        .timestamps
        .windows(2)
        .map(|w| w[1] - w[0] <= max_gap)
        .collect();
    // Prefix sums of violations let each window check its span in O(1).
    let mut bad_before = vec![0usize; len];
    for i in 1..len {
        bad_before[i] = bad_before[i - 1] + usize::from(!gap_ok[i - 1]);
    }

    let mut samples = Vec::new();
    for end in (n - 1)..len {
        let start = end + 1 - n;
        if bad_before[end] - bad_before[start] > 0 {
            continue;
        }
        samples.push(WindowSample {
            window: pair.x[start..=end].to_vec(),
            target: pair.y[end],
            sensor_id: pair.sensor_id.clone(),
            timestamp: pair.timestamps[end],
        });
    }
    Ok(samples)
}
