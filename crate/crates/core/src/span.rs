use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A half-open time interval in integer milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawSpan")]
pub struct TimeSpan {
    start_ms: u64,
    end_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid time span {start_ms}_{end_ms}: start must be before end")]
pub struct InvalidSpan {
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Deserialize)]
struct RawSpan {
    start_ms: u64,
    end_ms: u64,
}

impl TryFrom<RawSpan> for TimeSpan {
    type Error = InvalidSpan;

    fn try_from(raw: RawSpan) -> Result<Self, Self::Error> {
        TimeSpan::new(raw.start_ms, raw.end_ms)
    }
}

impl TimeSpan {
    pub fn new(start_ms: u64, end_ms: u64) -> Result<Self, InvalidSpan> {
        if start_ms < end_ms {
            Ok(Self { start_ms, end_ms })
        } else {
            Err(InvalidSpan { start_ms, end_ms })
        }
    }

    pub fn start_ms(&self) -> u64 {
        self.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    /// Duration in seconds, exact at millisecond precision for rational `T`.
    pub fn duration_s<T: Scalar>(&self) -> T {
        T::from_ratio(self.duration_ms(), 1000)
    }

    /// Length of the intersection with `other`, zero when disjoint.
    pub fn overlap_ms(&self, other: &TimeSpan) -> u64 {
        let lo = self.start_ms.max(other.start_ms);
        let hi = self.end_ms.min(other.end_ms);
        hi.saturating_sub(lo)
    }

    /// Gap between the two intervals, zero when they touch or overlap.
    pub fn gap_ms(&self, other: &TimeSpan) -> u64 {
        other
            .start_ms
            .saturating_sub(self.end_ms)
            .max(self.start_ms.saturating_sub(other.end_ms))
    }

    pub fn contains_ms(&self, t: u64) -> bool {
        self.start_ms <= t && t <= self.end_ms
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.start_ms, self.end_ms)
    }
}
