use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::{seeded_rng, stream};

/// Observation protocol: random gaps or equal spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Irregular,
    Regular,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Irregular => "irregular",
            Protocol::Regular => "regular",
        }
    }

    pub fn default_snapshots(self) -> usize {
        match self {
            Protocol::Irregular => 120,
            Protocol::Regular => 80,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "irregular" => Ok(Protocol::Irregular),
            "regular" => Ok(Protocol::Regular),
            _ => Err(DynamicsError::Config(format!("unknown protocol `{s}`"))),
        }
    }
}

/// Relative minimum gap between irregular samples.
pub const MIN_GAP_FRACTION: f64 = 1e-4;

/// Sorted observation times on `(0, horizon]`.
///
/// `Regular` gives `t_i = i * horizon / (count - 1)`, starting at 0. `Irregular`
/// draws `count` uniform times on `(0, horizon]`, rejecting any draw closer
/// than `horizon * 1e-4` to one already kept.
pub fn sample_schedule(
    protocol: Protocol,
    horizon: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>, DynamicsError> {
    if count < 2 {
        return Err(DynamicsError::Schedule(format!(
            "need at least 2 snapshots, got {count}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DynamicsError::Schedule(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    match protocol {
        Protocol::Regular => {
            let last = (count - 1) as f64;
            Ok((0..count).map(|i| horizon * i as f64 / last).collect())
        }
        Protocol::Irregular => {
            let min_gap = horizon * MIN_GAP_FRACTION;
            if (count as f64) * min_gap > horizon * 0.5 {
                return Err(DynamicsError::Schedule(format!(
                    "{count} samples cannot keep a minimum gap of {min_gap} within {horizon}"
                )));
            }
            let mut rng = seeded_rng(seed, stream::SCHEDULE);
            let mut times: Vec<f64> = Vec::with_capacity(count);
            let max_draws = 1000 * count;
            let mut draws = 0;
            while times.len() < count {
                draws += 1;
                if draws > max_draws {
                    return Err(DynamicsError::Schedule(format!(
                        "gave up after {max_draws} draws"
                    )));
                }
                // gen::<f64>() is in [0, 1), so this is in (0, horizon].
                let t = horizon * (1.0 - rng.gen::<f64>());
                let pos = times.partition_point(|&s| s < t);
                let clear_left = pos == 0 || t - times[pos - 1] >= min_gap;
                let clear_right = pos == times.len() || times[pos] - t >= min_gap;
                if clear_left && clear_right {
                    times.insert(pos, t);
                }
            }
            Ok(times)
        }
    }
}
