//! Batch scoring of forecast files against realised prices.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rules::{crps_ensemble, crps_quantile, default_ece_levels, ece, energy_score, ks_uniform, pit_ensemble, pit_quantile};
use crate::error::{Error, Result};
use crate::forecast::ForecastDistribution;
use crate::ingest::csvio::{format_timestamp, format_value_exact, parse_timestamp, write_atomic};
use crate::timeseries::HourlySeries;

/// Per-origin values of one metric, used as DM loss inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub metric: String,
    pub origins: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(metric: impl Into<String>, origins: Vec<DateTime<Utc>>, values: Vec<f64>) -> Result<Self> {
        if origins.len() != values.len() {
            return Err(Error::Shape {
                expected: origins.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("score series contains non-finite values"));
        }
        Ok(Self {
            metric: metric.into(),
            origins,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Restricts both series to their common origins.
    pub fn align(&self, other: &ScoreSeries) -> (ScoreSeries, ScoreSeries) {
        let theirs: BTreeMap<_, _> = other.origins.iter().zip(&other.values).collect();
        let mut o = Vec::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (t, v) in self.origins.iter().zip(&self.values) {
            if let Some(w) = theirs.get(t) {
                o.push(*t);
                a.push(*v);
                b.push(**w);
            }
        }
        (
            ScoreSeries { metric: self.metric.clone(), origins: o.clone(), values: a },
            ScoreSeries { metric: other.metric.clone(), origins: o, values: b },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub origin: DateTime<Utc>,
    /// `None` for per-origin metrics such as the energy score.
    pub horizon: Option<usize>,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub origins: usize,
    pub skipped_origins: usize,
    pub crps: f64,
    pub energy_score: Option<f64>,
    pub ece: f64,
    pub pit_ks: f64,
}

const METRICS: [&str; 3] = ["crps", "pit", "energy_score"];

#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    /// Origins without a complete realised horizon.
    pub skipped: Vec<DateTime<Utc>>,
}

struct OriginScores {
    origin: DateTime<Utc>,
    crps: Vec<f64>,
    pit: Vec<f64>,
    es: Option<f64>,
}

fn realised(actual: &HourlySeries, origin: DateTime<Utc>, horizon: usize) -> Option<Vec<f64>> {
    (0..horizon)
        .map(|h| {
            let t = origin + Duration::hours(h as i64);
            let i = actual.index_of(t)?;
            (!actual.filled()[i]).then(|| actual.values()[i])
        })
        .collect()
}

fn score_one(f: &ForecastDistribution, y: &[f64]) -> Result<OriginScores> {
    match f {
        ForecastDistribution::Ensemble(e) => {
            let mut crps = Vec::with_capacity(y.len());
            let mut pit = Vec::with_capacity(y.len());
            for (h, obs) in y.iter().enumerate() {
                let col = e.column(h);
                crps.push(crps_ensemble(&col, *obs)?);
                pit.push(pit_ensemble(&col, *obs));
            }
            Ok(OriginScores {
                origin: e.origin,
                crps,
                pit,
                es: Some(energy_score(&e.samples, y, 1.0)?),
            })
        }
        ForecastDistribution::Quantile(q) => {
            let mut crps = Vec::with_capacity(y.len());
            let mut pit = Vec::with_capacity(y.len());
            for (h, obs) in y.iter().enumerate() {
                let col = q.column(h);
                crps.push(crps_quantile(&q.levels, &col, *obs)?);
                pit.push(pit_quantile(&q.levels, &col, *obs));
            }
            Ok(OriginScores { origin: q.origin, crps, pit, es: None })
        }
    }
}

fn horizon_of(f: &ForecastDistribution) -> usize {
    match f {
        ForecastDistribution::Ensemble(e) => e.horizon(),
        ForecastDistribution::Quantile(q) => q.horizon(),
    }
}

impl ScoreTable {
    /// Scores every forecast whose full horizon is observed (not gap-filled) in `actual`.
    pub fn compute(forecasts: &[ForecastDistribution], actual: &HourlySeries) -> Result<Self> {
        let scored: Vec<Result<Option<OriginScores>>> = forecasts
            .par_iter()
            .map(|f| match realised(actual, f.origin(), horizon_of(f)) {
                Some(y) => score_one(f, &y).map(Some),
                None => Ok(None),
            })
            .collect();
        let mut table = ScoreTable::default();
        for (f, s) in forecasts.iter().zip(scored) {
            let Some(s) = s? else {
                table.skipped.push(f.origin());
                continue;
            };
            for (h, v) in s.crps.iter().enumerate() {
                table.rows.push(ScoreRow { origin: s.origin, horizon: Some(h), metric: "crps", value: *v });
            }
            for (h, v) in s.pit.iter().enumerate() {
                table.rows.push(ScoreRow { origin: s.origin, horizon: Some(h), metric: "pit", value: *v });
            }
            if let Some(es) = s.es {
                table.rows.push(ScoreRow { origin: s.origin, horizon: None, metric: "energy_score", value: es });
            }
        }
        if table.rows.is_empty() {
            return Err(Error::Empty("scored origins"));
        }
        Ok(table)
    }

    fn values(&self, metric: &str) -> impl Iterator<Item = &ScoreRow> {
        let metric = metric.to_string();
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// Per-origin mean of a per-horizon metric, or the per-origin metric itself.
    pub fn series(&self, metric: &str) -> Result<ScoreSeries> {
        let mut acc: BTreeMap<DateTime<Utc>, (f64, usize)> = BTreeMap::new();
        for r in self.values(metric) {
            let e = acc.entry(r.origin).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
        if acc.is_empty() {
            return Err(Error::domain(format!("no rows for metric {metric}")));
        }
        let origins = acc.keys().copied().collect();
        let values = acc.values().map(|(s, n)| s / *n as f64).collect();
        ScoreSeries::new(metric, origins, values)
    }

    pub fn pit(&self) -> Vec<f64> {
        self.values("pit").map(|r| r.value).collect()
    }

    pub fn summary(&self) -> Result<ScoreSummary> {
        let crps: Vec<f64> = self.values("crps").map(|r| r.value).collect();
        let es: Vec<f64> = self.values("energy_score").map(|r| r.value).collect();
        let pit = self.pit();
        Ok(ScoreSummary {
            origins: self.series("crps")?.len(),
            skipped_origins: self.skipped.len(),
            crps: crps.iter().sum::<f64>() / crps.len() as f64,
            energy_score: (!es.is_empty()).then(|| es.iter().sum::<f64>() / es.len() as f64),
            ece: ece(&pit, &default_ece_levels())?,
            pit_ks: ks_uniform(&pit)?,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("origin,horizon,metric,value\n");
        for r in &self.rows {
            let h = r.horizon.map_or(String::new(), |h| h.to_string());
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_timestamp(r.origin),
                h,
                r.metric,
                format_value_exact(r.value)
            ));
        }
        out
    }

    /// Parses the output of [`ScoreTable::to_csv`]. Skipped origins are not recorded there.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { index: i, message: e.to_string() })?;
            let bad = |m: &str| Error::Parse { index: i, message: m.to_string() };
            if rec.len() != 4 {
                return Err(bad("expected origin,horizon,metric,value"));
            }
            let origin = parse_timestamp(&rec[0]).ok_or_else(|| bad("bad origin"))?;
            let horizon = match rec[1].trim() {
                "" => None,
                h => Some(h.parse().map_err(|_| bad("bad horizon"))?),
            };
            let metric = METRICS
                .iter()
                .copied()
                .find(|m| *m == rec[2].trim())
                .ok_or_else(|| bad("unknown metric"))?;
            let value: f64 = rec[3].trim().parse().map_err(|_| bad("bad value"))?;
            rows.push(ScoreRow { origin, horizon, metric, value });
        }
        Ok(Self { rows, skipped: Vec::new() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn save(&self, csv_path: &Path, summary_path: &Path) -> Result<()> {
        write_atomic(csv_path, &self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.summary()?)?;
        write_atomic(summary_path, &(json + "\n"))
    }
}
