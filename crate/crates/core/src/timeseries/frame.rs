//! Aligned hourly feature table for one zone.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use chrono_tz::Tz;

use super::calendar::{calendar_row, CALENDAR_FEATURES};
use super::features::{proxy_name, FeatureKind, PRICE, PROXY_LAG_HOURS};
use super::series::{HourlySeries, Interval};
use super::standardize::Standardizer;
use crate::error::{Error, Result};

/// Column-major table on a contiguous hourly UTC axis. Column 0 is the price.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub zone: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub columns: Vec<Vec<f64>>,
}

impl FeatureFrame {
    /// Joins price, calendar columns and market covariates on their common range.
    ///
    /// Gaps in any input are forward-filled first. With `proxies`, every market
    /// covariate also contributes a column holding its value 168 hours earlier,
    /// and the frame starts late enough for that lag to exist.
    pub fn assemble(
        price: &HourlySeries,
        market: &[(&str, &HourlySeries)],
        tz: Tz,
        holidays: &BTreeSet<NaiveDate>,
        proxies: bool,
    ) -> Result<Self> {
        if price.is_empty() {
            return Err(Error::Empty("price series"));
        }
        let price = price.fill_gaps();
        let market: Vec<(&str, HourlySeries)> =
            market.iter().map(|(n, s)| (*n, s.fill_gaps())).collect();

        let mut start = price.first().expect("non-empty");
        let mut end = price.end().expect("non-empty");
        for (name, s) in &market {
            let (Some(first), Some(last)) = (s.first(), s.end()) else {
                return Err(Error::Schema {
                    column: name.to_string(),
                    message: "series is empty".into(),
                });
            };
            let first = if proxies {
                first + Duration::hours(PROXY_LAG_HOURS)
            } else {
                first
            };
            start = start.max(first);
            end = end.min(last);
        }
        if end <= start {
            return Err(Error::Coverage { start, end });
        }
        let range = Interval::new(start, end)?;
        let timestamps: Vec<_> = range.hourly().collect();

        let mut names = vec![PRICE.to_string()];
        let mut kinds = vec![FeatureKind::Target];
        let mut columns = vec![lookup(&price, &timestamps, 0)?];

        let cal: Vec<[f64; 8]> = timestamps.iter().map(|t| calendar_row(*t, tz, holidays)).collect();
        for (k, name) in CALENDAR_FEATURES.iter().enumerate() {
            names.push(name.to_string());
            kinds.push(FeatureKind::Calendar);
            columns.push(cal.iter().map(|r| r[k]).collect());
        }
        for (name, s) in &market {
            names.push(name.to_string());
            kinds.push(FeatureKind::Market);
            columns.push(lookup(s, &timestamps, 0)?);
        }
        if proxies {
            for (name, s) in &market {
                names.push(proxy_name(name));
                kinds.push(FeatureKind::Proxy);
                columns.push(lookup(s, &timestamps, PROXY_LAG_HOURS)?);
            }
        }
        Ok(Self {
            zone: price.zone.clone(),
            timestamps,
            names,
            kinds,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn target(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn span(&self) -> Option<Interval> {
        let first = *self.timestamps.first()?;
        let last = *self.timestamps.last()?;
        Some(Interval {
            start: first,
            end: last + Duration::hours(1),
        })
    }

    pub fn slice(&self, interval: Interval) -> Self {
        let lo = self.timestamps.partition_point(|t| *t < interval.start);
        let hi = self.timestamps.partition_point(|t| *t < interval.end);
        Self {
            zone: self.zone.clone(),
            timestamps: self.timestamps[lo..hi].to_vec(),
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            columns: self.columns.iter().map(|c| c[lo..hi].to_vec()).collect(),
        }
    }

    /// Keeps price and the named columns, in frame order.
    pub fn select(&self, keep: &[String]) -> Self {
        let idx: Vec<usize> = (0..self.width())
            .filter(|&i| i == 0 || keep.iter().any(|k| *k == self.names[i]))
            .collect();
        Self {
            zone: self.zone.clone(),
            timestamps: self.timestamps.clone(),
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            kinds: idx.iter().map(|&i| self.kinds[i]).collect(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }

    /// Fits a standardizer on the rows inside `train`.
    pub fn fit_standardizer(&self, train: Interval) -> Result<Standardizer> {
        let part = self.slice(train);
        let refs: Vec<&[f64]> = part.columns.iter().map(Vec::as_slice).collect();
        Standardizer::fit_columns(&refs)
    }

    pub fn standardized(&self, s: &Standardizer) -> Result<Self> {
        if s.width() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                actual: s.width(),
            });
        }
        let mut out = self.clone();
        for (i, col) in out.columns.iter_mut().enumerate() {
            col.iter_mut().for_each(|v| *v = s.apply(i, *v));
        }
        Ok(out)
    }
}

fn lookup(s: &HourlySeries, axis: &[DateTime<Utc>], lag_hours: i64) -> Result<Vec<f64>> {
    axis.iter()
        .map(|t| {
            let at = *t - Duration::hours(lag_hours);
            s.value_at(at).ok_or(Error::Coverage {
                start: at,
                end: at + Duration::hours(1),
            })
        })
        .collect()
}
