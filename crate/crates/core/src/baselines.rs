//! Empirical ensemble baselines.
//!
//! Same-hour lookbacks step through the UTC calendar in whole days. A target
//! hour whose history is too short yields an [`Omission`] for its origin.

use chrono::{DateTime, Datelike, Duration, Months, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::EnsembleForecast;
use crate::timeseries::HourlySeries;

pub const SAME_HOUR_DAYS: usize = 28;
pub const RECENT_DAYS: usize = 7;
pub const PRIOR_MONTHS: u32 = 12;
pub const DEFAULT_LAG_HOURS: i64 = 168;
pub const DEFAULT_DRAWS: usize = 200;
/// How far a month offset may step back over gaps before giving up.
const MAX_GAP_STEPS: i64 = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    SameHour28d,
    #[serde(rename = "7d-12m")]
    SevenDaysTwelveMonths,
    BootstrapPrice,
    BootstrapSynthetic,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::SameHour28d,
        BaselineKind::SevenDaysTwelveMonths,
        BaselineKind::BootstrapPrice,
        BaselineKind::BootstrapSynthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::SameHour28d => "same-hour-28d",
            BaselineKind::SevenDaysTwelveMonths => "7d-12m",
            BaselineKind::BootstrapPrice => "bootstrap-price",
            BaselineKind::BootstrapSynthetic => "bootstrap-synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown baseline {s:?}")))
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omission {
    pub origin: DateTime<Utc>,
    pub baseline: BaselineKind,
    pub reason: String,
}

pub type Outcome = std::result::Result<EnsembleForecast, Omission>;

fn omit(origin: DateTime<Utc>, baseline: BaselineKind, reason: String) -> Omission {
    Omission { origin, baseline, reason }
}

/// Transposes per-horizon sample lists into `samples[s][h]`.
fn to_rows(columns: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let s = columns[0].len();
    (0..s).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

/// The `n` most recent observations at `t − k days`, k ≥ 1, strictly before `origin`.
fn same_hour_lookback(history: &HourlySeries, t: DateTime<Utc>, origin: DateTime<Utc>, n: usize) -> Vec<f64> {
    let first = match history.first() {
        Some(f) => f,
        None => return Vec::new(),
    };
    let mut out = Vec::with_capacity(n);
    let mut day = t - Duration::days(1);
    while out.len() < n && day >= first {
        if day < origin {
            if let Some(v) = history.observed_at(day) {
                out.push(v);
            }
        }
        day -= Duration::days(1);
    }
    out
}

/// 28 most recent same-hour observations before the origin, per target hour.
pub fn same_hour_28d(history: &HourlySeries, origin: DateTime<Utc>, horizon: usize) -> Outcome {
    let kind = BaselineKind::SameHour28d;
    let mut columns = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = origin + Duration::hours(h as i64);
        let col = same_hour_lookback(history, t, origin, SAME_HOUR_DAYS);
        if col.len() < SAME_HOUR_DAYS {
            return Err(omit(origin, kind, format!("hour {h}: only {} prior days", col.len())));
        }
        columns.push(col);
    }
    EnsembleForecast::new(origin, to_rows(columns)).map_err(|e| omit(origin, kind, e.to_string()))
}

/// Same hour on `t`'s day-of-month `m` months earlier, clamped to month end,
/// stepping back a day at a time over gaps.
fn month_offset_value(history: &HourlySeries, t: DateTime<Utc>, m: u32) -> Option<f64> {
    let anchor = t.checked_sub_months(Months::new(m))?;
    (0..MAX_GAP_STEPS).find_map(|k| history.observed_at(anchor - Duration::days(k)))
}

/// Last 7 same-hour days plus the same day in each of the 12 prior months.
pub fn seven_days_twelve_months(history: &HourlySeries, origin: DateTime<Utc>, horizon: usize) -> Outcome {
    let kind = BaselineKind::SevenDaysTwelveMonths;
    let mut columns = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = origin + Duration::hours(h as i64);
        let mut col = same_hour_lookback(history, t, origin, RECENT_DAYS);
        if col.len() < RECENT_DAYS {
            return Err(omit(origin, kind, format!("hour {h}: only {} recent days", col.len())));
        }
        for m in 1..=PRIOR_MONTHS {
            match month_offset_value(history, t, m) {
                Some(v) => col.push(v),
                None => {
                    let day = t.checked_sub_months(Months::new(m)).map(|d| d.day());
                    return Err(omit(origin, kind, format!("hour {h}: no value {m} months back (day {day:?})")));
                }
            }
        }
        columns.push(col);
    }
    EnsembleForecast::new(origin, to_rows(columns)).map_err(|e| omit(origin, kind, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub lag_hours: i64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            lag_hours: DEFAULT_LAG_HOURS,
            draws: DEFAULT_DRAWS,
            seed: 0,
        }
    }
}

/// Lagged-reference point forecast plus residuals resampled from the training period.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    kind: BaselineKind,
    reference: HourlySeries,
    residuals: Vec<f64>,
    options: BootstrapOptions,
}

/// `reference(t − lag)`, else one hour earlier, else one hour later; only values before `origin`.
/// The fallback covers holes inside the reference, not instants before its start.
fn lagged(reference: &HourlySeries, t: DateTime<Utc>, lag: i64, origin: DateTime<Utc>) -> Option<f64> {
    let base = t - Duration::hours(lag);
    if reference.first().is_none_or(|f| base < f) {
        return None;
    }
    [0i64, -1, 1]
        .iter()
        .map(|d| base + Duration::hours(*d))
        .filter(|s| *s < origin)
        .find_map(|s| reference.observed_at(s))
}

impl Bootstrap {
    /// Builds the residual pool from target hours strictly before `split`.
    pub fn fit(
        kind: BaselineKind,
        target: &HourlySeries,
        reference: &HourlySeries,
        split: DateTime<Utc>,
        options: BootstrapOptions,
    ) -> Result<Self> {
        if !matches!(kind, BaselineKind::BootstrapPrice | BaselineKind::BootstrapSynthetic) {
            return Err(Error::domain(format!("{kind} is not a bootstrap baseline")));
        }
        if options.draws == 0 {
            return Err(Error::domain("bootstrap needs at least one draw"));
        }
        let residuals: Vec<f64> = target
            .iter()
            .zip(target.filled())
            .filter(|((t, _), filled)| *t < split && !**filled)
            .filter_map(|((t, y), _)| lagged(reference, t, options.lag_hours, split).map(|p| y - p))
            .collect();
        if residuals.is_empty() {
            return Err(Error::Empty("bootstrap residual pool"));
        }
        Ok(Self {
            kind,
            reference: reference.clone(),
            residuals,
            options,
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn forecast(&self, origin: DateTime<Utc>, horizon: usize) -> Outcome {
        let mut points = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let t = origin + Duration::hours(h as i64);
            match lagged(&self.reference, t, self.options.lag_hours, origin) {
                Some(p) => points.push(p),
                None => return Err(omit(origin, self.kind, format!("hour {h}: lagged reference missing"))),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed);
        rng.set_stream(origin.timestamp() as u64);
        let n = self.residuals.len();
        let samples = (0..self.options.draws)
            .map(|_| points.iter().map(|p| p + self.residuals[rng.gen_range(0..n)]).collect())
            .collect();
        EnsembleForecast::new(origin, samples).map_err(|e| omit(origin, self.kind, e.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct BaselineRun {
    pub forecasts: Vec<EnsembleForecast>,
    pub omitted: Vec<Omission>,
}

impl BaselineRun {
    fn collect(outcomes: Vec<Outcome>) -> Self {
        let mut run = BaselineRun::default();
        for o in outcomes {
            match o {
                Ok(f) => run.forecasts.push(f),
                Err(om) => {
                    log::warn!("{} omitted origin {}: {}", om.baseline, om.origin, om.reason);
                    run.omitted.push(om);
                }
            }
        }
        run
    }
}

/// Inputs shared by all baselines.
pub struct BaselineInputs<'a> {
    pub price: &'a HourlySeries,
    /// Required by the synthetic-price bootstrap.
    pub synthetic: Option<&'a HourlySeries>,
    /// First hour excluded from the bootstrap residual pool.
    pub split: DateTime<Utc>,
    pub bootstrap: BootstrapOptions,
}

pub fn run_baseline(kind: BaselineKind, inputs: &BaselineInputs<'_>, origins: &[DateTime<Utc>], horizon: usize) -> Result<BaselineRun> {
    let outcomes: Vec<Outcome> = match kind {
        BaselineKind::SameHour28d => origins.par_iter().map(|o| same_hour_28d(inputs.price, *o, horizon)).collect(),
        BaselineKind::SevenDaysTwelveMonths => origins
            .par_iter()
            .map(|o| seven_days_twelve_months(inputs.price, *o, horizon))
            .collect(),
        BaselineKind::BootstrapPrice | BaselineKind::BootstrapSynthetic => {
            let reference = if kind == BaselineKind::BootstrapPrice {
                inputs.price
            } else {
                inputs.synthetic.ok_or(Error::Empty("synthetic price series"))?
            };
            let b = Bootstrap::fit(kind, inputs.price, reference, inputs.split, inputs.bootstrap)?;
            origins.par_iter().map(|o| b.forecast(*o, horizon)).collect()
        }
    };
    Ok(BaselineRun::collect(outcomes))
}
