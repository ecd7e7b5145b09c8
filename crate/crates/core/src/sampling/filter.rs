//! The four screening rules applied to simulated trajectories.

use serde::{Deserialize, Serialize};

pub const H_UPPER: f64 = 1.1;
pub const H_LOWER: f64 = 0.2;
pub const REGROWTH_FACTOR: f64 = 1.5;
pub const INTENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UpperBound,
    LowerBound,
    NonphysicalGrowth,
    IncreasingIntensity,
}

impl RejectReason {
    pub const ALL: [RejectReason; 4] = [
        RejectReason::UpperBound,
        RejectReason::LowerBound,
        RejectReason::NonphysicalGrowth,
        RejectReason::IncreasingIntensity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::UpperBound => "upper bound",
            RejectReason::LowerBound => "lower bound",
            RejectReason::NonphysicalGrowth => "nonphysical growth",
            RejectReason::IncreasingIntensity => "increasing intensity",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Ok(())` when the trajectory passes every rule, otherwise the first rule
/// that fails, checked in the order of [`RejectReason::ALL`].
pub fn accept(h: &[f64], intensity: &[f64]) -> Result<(), RejectReason> {
    let (min_h, max_h) = h
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if max_h > H_UPPER {
        return Err(RejectReason::UpperBound);
    }
    if min_h < H_LOWER {
        return Err(RejectReason::LowerBound);
    }
    if let Some(&last) = h.last() {
        if last > REGROWTH_FACTOR * min_h {
            return Err(RejectReason::NonphysicalGrowth);
        }
    }
    if intensity.windows(2).any(|w| w[1] > w[0] + INTENSITY_TOL) {
        return Err(RejectReason::IncreasingIntensity);
    }
    Ok(())
}
