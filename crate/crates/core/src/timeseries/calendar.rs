//! Deterministic calendar covariates.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc, Weekday};
use chrono_tz::Tz;

use crate::error::{Error, Result};

/// Column names emitted by [`build_calendar_features`], in order.
pub const CALENDAR_FEATURES: [&str; 8] = [
    "hour_sin",
    "hour_cos",
    "dow_sin",
    "dow_cos",
    "month_sin",
    "month_cos",
    "is_weekend",
    "is_holiday",
];

/// Maps `value` in `[0, period)` onto the unit circle.
pub fn cyclical_encode(value: u32, period: u32) -> Result<(f64, f64)> {
    if !matches!(period, 24 | 7 | 12) {
        return Err(Error::domain(format!("unsupported period {period}")));
    }
    if value >= period {
        return Err(Error::domain(format!("value {value} outside [0, {period})")));
    }
    let phase = 2.0 * PI * f64::from(value) / f64::from(period);
    Ok((phase.sin(), phase.cos()))
}

/// The 8 calendar columns for one instant, computed in the zone's local time.
pub fn calendar_row(t: DateTime<Utc>, tz: Tz, holidays: &BTreeSet<NaiveDate>) -> [f64; 8] {
    let local = t.with_timezone(&tz);
    let (hs, hc) = cyclical_encode(local.hour(), 24).expect("hour < 24");
    let (ds, dc) = cyclical_encode(local.weekday().num_days_from_monday(), 7).expect("weekday < 7");
    let (ms, mc) = cyclical_encode(local.month0(), 12).expect("month0 < 12");
    let weekend = matches!(local.weekday(), Weekday::Sat | Weekday::Sun);
    let holiday = holidays.contains(&local.date_naive());
    [
        hs,
        hc,
        ds,
        dc,
        ms,
        mc,
        f64::from(u8::from(weekend)),
        f64::from(u8::from(holiday)),
    ]
}

/// One row of 8 calendar columns per timestamp.
pub fn build_calendar_features(
    timestamps: &[DateTime<Utc>],
    tz: Tz,
    holidays: &BTreeSet<NaiveDate>,
) -> Vec<[f64; 8]> {
    timestamps.iter().map(|t| calendar_row(*t, tz, holidays)).collect()
}
