//! CSV persistence for hourly series and feature frames.
//!
//! Series files are `timestamp_utc,value` with `Z`-suffixed ISO-8601 instants,
//! values printed with at most six decimals and LF line endings.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::timeseries::features::resolve_feature;
use crate::timeseries::{FeatureFrame, HourlySeries};

pub const SERIES_HEADER: [&str; 2] = ["timestamp_utc", "value"];

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim()).ok().map(|t| t.with_timezone(&Utc))
}

/// Fixed six-decimal rendering with trailing zeros trimmed.
pub fn format_value(v: f64) -> String {
    let mut s = format!("{v:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_value_exact(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn series_to_csv(series: &HourlySeries) -> String {
    let mut out = String::with_capacity(32 * (series.len() + 1));
    out.push_str("timestamp_utc,value\n");
    for (t, v) in series.iter() {
        out.push_str(&format_timestamp(t));
        out.push(',');
        out.push_str(&format_value(v));
        out.push('\n');
    }
    out
}

pub fn save_csv(series: &HourlySeries, path: &Path) -> Result<()> {
    write_atomic(path, &series_to_csv(series))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn csv_err(index: usize, e: csv::Error) -> Error {
    Error::Parse {
        index,
        message: e.to_string(),
    }
}

pub fn load_csv(path: &Path, zone: &str) -> Result<HourlySeries> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
    for (i, expected) in SERIES_HEADER.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *expected => {}
            other => {
                return Err(Error::Schema {
                    column: expected.to_string(),
                    message: format!("expected header `{expected}`, found {other:?}"),
                })
            }
        }
    }
    if headers.len() != SERIES_HEADER.len() {
        return Err(Error::Schema {
            column: headers.get(2).unwrap_or_default().to_string(),
            message: "unexpected extra column".into(),
        });
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(i, e))?;
        let t = parse_timestamp(&rec[0]).ok_or_else(|| Error::Schema {
            column: "timestamp_utc".into(),
            message: format!("record {i}: cannot parse `{}`", &rec[0]),
        })?;
        let v: f64 = rec[1].trim().parse().map_err(|_| Error::Schema {
            column: "value".into(),
            message: format!("record {i}: cannot parse `{}`", &rec[1]),
        })?;
        timestamps.push(t);
        values.push(v);
    }
    HourlySeries::new(zone, timestamps, values)
}

/// Writes a frame as `timestamp_utc,<column>...`.
pub fn save_frame_csv(frame: &FeatureFrame, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("timestamp_utc");
    for n in &frame.names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (r, t) in frame.timestamps.iter().enumerate() {
        out.push_str(&format_timestamp(*t));
        for c in &frame.columns {
            out.push(',');
            out.push_str(&format_value(c[r]));
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn load_frame_csv(path: &Path, zone: &str) -> Result<FeatureFrame> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
    if headers.get(0) != Some("timestamp_utc") {
        return Err(Error::Schema {
            column: "timestamp_utc".into(),
            message: "first column must be timestamp_utc".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if names.first().map(String::as_str) != Some(crate::timeseries::features::PRICE) {
        return Err(Error::Schema {
            column: "price".into(),
            message: "second column must be price".into(),
        });
    }
    let kinds = names
        .iter()
        .map(|n| {
            resolve_feature(n).map_err(|e| Error::Schema {
                column: n.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut timestamps = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(i, e))?;
        let t = parse_timestamp(&rec[0]).ok_or_else(|| Error::Schema {
            column: "timestamp_utc".into(),
            message: format!("record {i}: cannot parse `{}`", &rec[0]),
        })?;
        if let Some(prev) = timestamps.last() {
            if t - *prev != chrono::Duration::hours(1) {
                return Err(Error::Parse {
                    index: i,
                    message: "frame rows must be contiguous hours".into(),
                });
            }
        }
        timestamps.push(t);
        for (c, col) in columns.iter_mut().enumerate() {
            let v: f64 = rec[c + 1].trim().parse().map_err(|_| Error::Schema {
                column: names[c].clone(),
                message: format!("record {i}: cannot parse `{}`", &rec[c + 1]),
            })?;
            col.push(v);
        }
    }
    Ok(FeatureFrame {
        zone: zone.to_string(),
        timestamps,
        names,
        kinds,
        columns,
    })
}
