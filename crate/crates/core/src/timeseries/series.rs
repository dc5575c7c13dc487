use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Interval {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if end < start {
            return Err(Error::domain(format!("interval end {end} precedes start {start}")));
        }
        Ok(Self { start, end })
    }

    pub fn hours(&self) -> i64 {
        (self.end - self.start).num_hours()
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        t >= self.start && t < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Every hour start inside the interval.
    pub fn hourly(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        let n = self.hours().max(0);
        (0..n).map(move |h| self.start + Duration::hours(h))
    }
}

pub(crate) fn is_hour_aligned(t: &DateTime<Utc>) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

/// Hourly observations of one variable for one bidding zone.
///
/// Timestamps are strictly increasing UTC hour starts. A step larger than one
/// hour is a gap; [`HourlySeries::fill_gaps`] closes gaps by forward fill and
/// records which hours were synthesised in `filled`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub zone: String,
    timestamps: Vec<DateTime<Utc>>,
    values: Vec<f64>,
    filled: Vec<bool>,
}

impl HourlySeries {
    pub fn new(zone: impl Into<String>, timestamps: Vec<DateTime<Utc>>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Shape {
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        for (i, t) in timestamps.iter().enumerate() {
            if !is_hour_aligned(t) {
                return Err(Error::Parse {
                    index: i,
                    message: format!("timestamp {t} is not on the hour"),
                });
            }
            if i > 0 && *t <= timestamps[i - 1] {
                return Err(Error::Parse {
                    index: i,
                    message: format!("timestamp {t} does not increase strictly"),
                });
            }
        }
        let filled = vec![false; values.len()];
        Ok(Self {
            zone: zone.into(),
            timestamps,
            values,
            filled,
        })
    }

    pub fn empty(zone: impl Into<String>) -> Self {
        Self {
            zone: zone.into(),
            timestamps: Vec::new(),
            values: Vec::new(),
            filled: Vec::new(),
        }
    }

    /// Builds a series from unordered records. Duplicate timestamps keep the
    /// first occurrence (DST repeats); non-finite values are dropped as gaps.
    pub fn from_records(
        zone: impl Into<String>,
        records: impl IntoIterator<Item = (DateTime<Utc>, f64)>,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeMap::new();
        for (i, (t, v)) in records.into_iter().enumerate() {
            if !is_hour_aligned(&t) {
                return Err(Error::Parse {
                    index: i,
                    message: format!("timestamp {t} is not on the hour"),
                });
            }
            if v.is_finite() {
                seen.entry(t).or_insert(v);
            }
        }
        let (timestamps, values) = seen.into_iter().unzip();
        Self::new(zone, timestamps, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn filled(&self) -> &[bool] {
        &self.filled
    }

    pub fn first(&self) -> Option<DateTime<Utc>> {
        self.timestamps.first().copied()
    }

    /// One past the last covered hour.
    pub fn end(&self) -> Option<DateTime<Utc>> {
        self.timestamps.last().map(|t| *t + Duration::hours(1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DateTime<Utc>, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.values.iter().copied())
    }

    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    pub fn value_at(&self, t: DateTime<Utc>) -> Option<f64> {
        self.index_of(t).map(|i| self.values[i])
    }

    /// Like [`value_at`](Self::value_at) but treats gap-filled cells as missing.
    pub fn observed_at(&self, t: DateTime<Utc>) -> Option<f64> {
        self.index_of(t).filter(|i| !self.filled[*i]).map(|i| self.values[i])
    }

    pub fn is_contiguous(&self) -> bool {
        self.timestamps
            .windows(2)
            .all(|w| w[1] - w[0] == Duration::hours(1))
    }

    /// Hours inside `[first, end)` that have no observation.
    pub fn gaps(&self) -> Vec<DateTime<Utc>> {
        let mut out = Vec::new();
        for w in self.timestamps.windows(2) {
            let mut t = w[0] + Duration::hours(1);
            while t < w[1] {
                out.push(t);
                t += Duration::hours(1);
            }
        }
        out
    }

    /// Forward-fills every missing hour and flags it.
    pub fn fill_gaps(&self) -> Self {
        let mut timestamps = Vec::with_capacity(self.len());
        let mut values = Vec::with_capacity(self.len());
        let mut filled = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if i > 0 {
                let mut t = self.timestamps[i - 1] + Duration::hours(1);
                while t < self.timestamps[i] {
                    timestamps.push(t);
                    values.push(self.values[i - 1]);
                    filled.push(true);
                    t += Duration::hours(1);
                }
            }
            timestamps.push(self.timestamps[i]);
            values.push(self.values[i]);
            filled.push(self.filled[i]);
        }
        Self {
            zone: self.zone.clone(),
            timestamps,
            values,
            filled,
        }
    }

    pub fn slice(&self, interval: Interval) -> Self {
        let lo = self.timestamps.partition_point(|t| *t < interval.start);
        let hi = self.timestamps.partition_point(|t| *t < interval.end);
        Self {
            zone: self.zone.clone(),
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
            filled: self.filled[lo..hi].to_vec(),
        }
    }

    /// Merges `other` into `self`; existing observations win on overlap.
    pub fn merge(&self, other: &HourlySeries) -> Self {
        let records = self.iter().chain(other.iter());
        let mut merged =
            Self::from_records(self.zone.clone(), records).expect("inputs are already valid series");
        for (i, t) in merged.timestamps.iter().enumerate() {
            if let Some(j) = self.index_of(*t) {
                merged.filled[i] = self.filled[j];
            }
        }
        merged
    }

    /// Covers every hour of `interval`?
    pub fn covers(&self, interval: Interval) -> bool {
        if interval.is_empty() {
            return true;
        }
        let s = self.slice(interval);
        s.len() as i64 == interval.hours()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}
