//! Forecast distributions exchanged between models and scorers, and their files.
//!
//! Ensemble files: `origin,sample_idx,h0..h{H-1}`, one row per member.
//! Quantile files: `origin,horizon,level,value`, one row per (origin, horizon, level).

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::ingest::csvio::{format_timestamp, format_value_exact, parse_timestamp, write_atomic};

/// `samples[s][h]`: member `s` at horizon step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast {
    pub origin: DateTime<Utc>,
    pub samples: Vec<Vec<f64>>,
}

impl EnsembleForecast {
    pub fn new(origin: DateTime<Utc>, samples: Vec<Vec<f64>>) -> Result<Self> {
        let h = samples.first().ok_or(Error::Empty("ensemble"))?.len();
        if let Some(bad) = samples.iter().find(|r| r.len() != h) {
            return Err(Error::Shape {
                expected: h,
                actual: bad.len(),
            });
        }
        Ok(Self { origin, samples })
    }

    pub fn size(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Members at one horizon step.
    pub fn column(&self, h: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[h]).collect()
    }
}

/// `values[q][h]`: level `levels[q]` at horizon step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub origin: DateTime<Utc>,
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl QuantileForecast {
    pub fn new(origin: DateTime<Utc>, levels: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if levels.len() != values.len() {
            return Err(Error::Shape {
                expected: levels.len(),
                actual: values.len(),
            });
        }
        if levels.is_empty() {
            return Err(Error::Empty("quantile levels"));
        }
        check_levels(&levels)?;
        let h = values[0].len();
        if let Some(bad) = values.iter().find(|r| r.len() != h) {
            return Err(Error::Shape {
                expected: h,
                actual: bad.len(),
            });
        }
        Ok(Self { origin, levels, values })
    }

    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Values across levels at one horizon step.
    pub fn column(&self, h: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[h]).collect()
    }

    pub fn is_monotone(&self) -> bool {
        (0..self.horizon()).all(|h| self.values.windows(2).all(|w| w[0][h] <= w[1][h]))
    }
}

pub(crate) fn check_levels(levels: &[f64]) -> Result<()> {
    for (i, l) in levels.iter().enumerate() {
        if !(*l > 0.0 && *l < 1.0) {
            return Err(Error::domain(format!("quantile level {l} outside (0, 1)")));
        }
        if i > 0 && *l <= levels[i - 1] {
            return Err(Error::domain("quantile levels must increase strictly"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastDistribution {
    Ensemble(EnsembleForecast),
    Quantile(QuantileForecast),
}

impl ForecastDistribution {
    pub fn origin(&self) -> DateTime<Utc> {
        match self {
            ForecastDistribution::Ensemble(e) => e.origin,
            ForecastDistribution::Quantile(q) => q.origin,
        }
    }
}

pub fn ensembles_to_csv(forecasts: &[EnsembleForecast]) -> String {
    let h = forecasts.first().map_or(0, EnsembleForecast::horizon);
    let mut out = String::from("origin,sample_idx");
    for k in 0..h {
        out.push_str(&format!(",h{k}"));
    }
    out.push('\n');
    for f in forecasts {
        let o = format_timestamp(f.origin);
        for (s, row) in f.samples.iter().enumerate() {
            out.push_str(&o);
            out.push(',');
            out.push_str(&s.to_string());
            for v in row {
                out.push(',');
                out.push_str(&format_value_exact(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_ensembles(forecasts: &[EnsembleForecast], path: &Path) -> Result<()> {
    write_atomic(path, &ensembles_to_csv(forecasts))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(f))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, column: &str, row: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Schema {
            column: column.to_string(),
            message: format!("record {row}: cannot parse {:?}", rec.get(i)),
        })
}

fn origin_field(rec: &csv::StringRecord, row: usize) -> Result<DateTime<Utc>> {
    rec.get(0).and_then(parse_timestamp).ok_or_else(|| Error::Schema {
        column: "origin".into(),
        message: format!("record {row}: cannot parse {:?}", rec.get(0)),
    })
}

/// Reads an ensemble file. Members are ordered by `sample_idx`.
pub fn load_ensembles(path: &Path) -> Result<Vec<EnsembleForecast>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| Error::Parse { index: 0, message: e.to_string() })?.clone();
    if headers.get(0) != Some("origin") || headers.get(1) != Some("sample_idx") {
        return Err(Error::Schema {
            column: "origin".into(),
            message: "ensemble header must start with origin,sample_idx".into(),
        });
    }
    let h = headers.len() - 2;
    for k in 0..h {
        if headers.get(k + 2) != Some(format!("h{k}").as_str()) {
            return Err(Error::Schema {
                column: format!("h{k}"),
                message: format!("found {:?}", headers.get(k + 2)),
            });
        }
    }
    let mut by_origin: BTreeMap<DateTime<Utc>, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { index: i, message: e.to_string() })?;
        let origin = origin_field(&rec, i)?;
        let idx: usize = field(&rec, 1, "sample_idx", i)?;
        let row = (0..h)
            .map(|k| field(&rec, k + 2, &format!("h{k}"), i))
            .collect::<Result<Vec<f64>>>()?;
        if by_origin.entry(origin).or_default().insert(idx, row).is_some() {
            return Err(Error::Parse {
                index: i,
                message: format!("duplicate sample {idx} for origin {origin}"),
            });
        }
    }
    by_origin
        .into_iter()
        .map(|(o, rows)| EnsembleForecast::new(o, rows.into_values().collect()))
        .collect()
}

pub fn quantiles_to_csv(forecasts: &[QuantileForecast]) -> String {
    let mut out = String::from("origin,horizon,level,value\n");
    for f in forecasts {
        let o = format_timestamp(f.origin);
        for h in 0..f.horizon() {
            for (q, level) in f.levels.iter().enumerate() {
                out.push_str(&format!(
                    "{o},{h},{},{}\n",
                    format_value_exact(*level),
                    format_value_exact(f.values[q][h])
                ));
            }
        }
    }
    out
}

pub fn save_quantiles(forecasts: &[QuantileForecast], path: &Path) -> Result<()> {
    write_atomic(path, &quantiles_to_csv(forecasts))
}

/// Reads a quantile file; every origin must carry the same level set at every horizon.
pub fn load_quantiles(path: &Path) -> Result<Vec<QuantileForecast>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| Error::Parse { index: 0, message: e.to_string() })?.clone();
    for (i, name) in ["origin", "horizon", "level", "value"].iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(Error::Schema {
                column: name.to_string(),
                message: format!("found {:?}", headers.get(i)),
            });
        }
    }
    // origin -> horizon -> level bits -> (level, value)
    type Cells = BTreeMap<usize, BTreeMap<u64, (f64, f64)>>;
    let mut by_origin: BTreeMap<DateTime<Utc>, Cells> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { index: i, message: e.to_string() })?;
        let origin = origin_field(&rec, i)?;
        let h: usize = field(&rec, 1, "horizon", i)?;
        let level: f64 = field(&rec, 2, "level", i)?;
        let value: f64 = field(&rec, 3, "value", i)?;
        by_origin
            .entry(origin)
            .or_default()
            .entry(h)
            .or_default()
            .insert(level_key(level), (level, value));
    }
    let mut out = Vec::with_capacity(by_origin.len());
    for (origin, cells) in by_origin {
        let horizons = cells.len();
        if cells.keys().copied().ne(0..horizons) {
            return Err(Error::Schema {
                column: "horizon".into(),
                message: format!("origin {origin}: horizons are not 0..{horizons}"),
            });
        }
        let levels: Vec<f64> = cells[&0].values().map(|(l, _)| *l).collect();
        let mut values = vec![vec![0.0; horizons]; levels.len()];
        for (h, per_level) in &cells {
            let these: Vec<f64> = per_level.values().map(|(l, _)| *l).collect();
            if these != levels {
                return Err(Error::Schema {
                    column: "level".into(),
                    message: format!("origin {origin}: level set differs at horizon {h}"),
                });
            }
            for (q, (_, v)) in per_level.values().enumerate() {
                values[q][*h] = *v;
            }
        }
        out.push(QuantileForecast::new(origin, levels, values)?);
    }
    Ok(out)
}

/// Order-preserving key for positive levels.
fn level_key(level: f64) -> u64 {
    level.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    #[test]
    fn ensemble_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let o = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let fs: Vec<_> = (0..3)
            .map(|d| {
                EnsembleForecast::new(
                    o + Duration::days(d),
                    (0..4).map(|s| (0..24).map(|h| (s * 100 + h) as f64 / 7.0 + d as f64).collect()).collect(),
                )
                .unwrap()
            })
            .collect();
        save_ensembles(&fs, &p).unwrap();
        assert_eq!(load_ensembles(&p).unwrap(), fs);
    }

    #[test]
    fn quantile_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        let o = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let levels: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let values = levels.iter().map(|l| (0..24).map(|h| l * 10.0 + h as f64 / 3.0).collect()).collect();
        let f = QuantileForecast::new(o, levels, values).unwrap();
        save_quantiles(std::slice::from_ref(&f), &p).unwrap();
        assert_eq!(load_quantiles(&p).unwrap(), vec![f]);
    }

    #[test]
    fn rejects_bad_levels() {
        let o = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        assert!(QuantileForecast::new(o, vec![0.5, 0.5], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(QuantileForecast::new(o, vec![1.0], vec![vec![1.0]]).is_err());
    }
}
