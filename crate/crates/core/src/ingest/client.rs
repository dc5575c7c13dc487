//! Day-ahead price client with an on-disk CSV cache.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, DurationRound, TimeZone, Utc};
use serde_json::Value;

use super::config::ZoneConfig;
use super::csvio::{load_csv, save_csv};
use crate::error::{Error, Result};
use crate::timeseries::features::PRICE;
use crate::timeseries::{HourlySeries, Interval};

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub attempts: u32,
    pub backoff: Duration,
    /// Minimum spacing between two requests from this client.
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff: Duration::from_millis(500),
            min_interval: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Fetches `GET {base}/price?bzn=..&start=..&end=..` and maintains the cache.
#[derive(Clone)]
pub struct PriceClient {
    http: reqwest::blocking::Client,
    options: ClientOptions,
    last_request: Arc<Mutex<Option<Instant>>>,
    file_locks: Arc<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>>,
}

impl PriceClient {
    pub fn new(options: ClientOptions) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(options.timeout)
            .user_agent(concat!("epf/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            http,
            options,
            last_request: Arc::new(Mutex::new(None)),
            file_locks: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    fn lock_for(&self, path: &Path) -> Arc<Mutex<()>> {
        let mut locks = self.file_locks.lock().expect("lock table poisoned");
        locks.entry(path.to_path_buf()).or_default().clone()
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().expect("pacing lock poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.options.min_interval {
                std::thread::sleep(self.options.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    /// Hourly prices over `interval`, served from cache when it already covers it.
    pub fn fetch_prices(&self, zone: &ZoneConfig, interval: Interval) -> Result<HourlySeries> {
        if interval.is_empty() {
            return Ok(HourlySeries::empty(&zone.code));
        }
        let path = zone.cache_path(PRICE);
        let lock = self.lock_for(&path);
        let _guard = lock.lock().expect("cache lock poisoned");

        let cached = if path.exists() {
            Some(load_csv(&path, &zone.code)?)
        } else {
            None
        };
        if let Some(c) = &cached {
            if c.covers(interval) {
                log::debug!("cache hit for {} {:?}", zone.code, interval);
                return Ok(c.slice(interval));
            }
        }

        let body = self.get_with_retries(&price_url(&zone.endpoint, &zone.code, interval))?;
        let fresh = parse_price_payload(&zone.code, &body)?;
        let merged = match &cached {
            Some(c) => c.merge(&fresh),
            None => fresh,
        };
        save_csv(&merged, &path)?;
        Ok(merged.slice(interval))
    }

    fn get_with_retries(&self, url: &str) -> Result<String> {
        let mut last_err = String::new();
        for attempt in 1..=self.options.attempts {
            self.pace();
            match self.http.get(url).send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.text().map_err(|e| Error::Transport {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
                Ok(resp) => last_err = format!("HTTP {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
            log::warn!("request {url} failed (attempt {attempt}): {last_err}");
            if attempt < self.options.attempts {
                std::thread::sleep(self.options.backoff * 2u32.pow(attempt - 1));
            }
        }
        Err(Error::Transport {
            attempts: self.options.attempts,
            message: last_err,
        })
    }
}

pub fn price_url(base: &str, zone: &str, interval: Interval) -> String {
    let fmt = "%Y-%m-%dT%H:%MZ";
    format!(
        "{}/price?bzn={}&start={}&end={}",
        base.trim_end_matches('/'),
        zone,
        interval.start.format(fmt),
        interval.end.format(fmt)
    )
}

/// Parses `{"unix_seconds": [...], "price": [...]}`.
///
/// Null prices are gaps. Repeated instants keep their first record, and
/// sub-hourly records are averaged into their hour.
pub fn parse_price_payload(zone: &str, body: &str) -> Result<HourlySeries> {
    let root: Value = serde_json::from_str(body).map_err(|e| Error::Parse {
        index: 0,
        message: format!("payload is not JSON: {e}"),
    })?;
    let array = |key: &str| -> Result<&Vec<Value>> {
        root.get(key).and_then(Value::as_array).ok_or_else(|| Error::Parse {
            index: 0,
            message: format!("missing array `{key}`"),
        })
    };
    let secs = array("unix_seconds")?;
    let prices = array("price")?;
    if secs.len() != prices.len() {
        return Err(Error::Parse {
            index: secs.len().min(prices.len()),
            message: format!("{} timestamps but {} prices", secs.len(), prices.len()),
        });
    }

    let mut first_seen: BTreeMap<DateTime<Utc>, f64> = BTreeMap::new();
    for (i, (s, p)) in secs.iter().zip(prices).enumerate() {
        let s = s.as_i64().ok_or_else(|| Error::Parse {
            index: i,
            message: format!("unix_seconds is not an integer: {s}"),
        })?;
        let t = Utc.timestamp_opt(s, 0).single().ok_or_else(|| Error::Parse {
            index: i,
            message: format!("timestamp {s} out of range"),
        })?;
        let v = match p {
            Value::Null => continue,
            v => v.as_f64().ok_or_else(|| Error::Parse {
                index: i,
                message: format!("price is not a number: {v}"),
            })?,
        };
        first_seen.entry(t).or_insert(v);
    }

    let mut hourly: BTreeMap<DateTime<Utc>, (f64, usize)> = BTreeMap::new();
    for (t, v) in first_seen {
        let hour = t.duration_trunc(chrono::Duration::hours(1)).expect("in range");
        let e = hourly.entry(hour).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    HourlySeries::from_records(zone, hourly.into_iter().map(|(t, (sum, n))| (t, sum / n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_entries_are_gaps() {
        let body = r#"{"unix_seconds":[1704067200,1704070800,1704074400],"price":[10.0,null,12.0]}"#;
        let s = parse_price_payload("DE-LU", body).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.gaps().len(), 1);
    }

    #[test]
    fn duplicated_hour_keeps_first() {
        let body = r#"{"unix_seconds":[1704067200,1704070800,1704070800,1704074400],"price":[1,2,99,3]}"#;
        let s = parse_price_payload("DE-LU", body).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn quarter_hours_average_into_the_hour() {
        let body = r#"{"unix_seconds":[1704067200,1704068100,1704069000,1704069900],"price":[1,2,3,6]}"#;
        let s = parse_price_payload("DE-LU", body).unwrap();
        assert_eq!(s.values(), &[3.0]);
    }

    #[test]
    fn malformed_record_reports_index() {
        let body = r#"{"unix_seconds":[1704067200,"x"],"price":[1,2]}"#;
        assert!(matches!(parse_price_payload("Z", body), Err(Error::Parse { index: 1, .. })));
        let body = r#"{"unix_seconds":[1704067200,1704070800],"price":[1,"abc"]}"#;
        assert!(matches!(parse_price_payload("Z", body), Err(Error::Parse { index: 1, .. })));
        let body = r#"{"unix_seconds":[1704067200],"price":[1,2]}"#;
        assert!(parse_price_payload("Z", body).is_err());
    }

    #[test]
    fn url_shape() {
        let iv = Interval::new(
            Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            Utc.with_ymd_and_hms(2024, 1, 2, 0, 0, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(
            price_url("https://api.example/", "DE-LU", iv),
            "https://api.example/price?bzn=DE-LU&start=2024-01-01T00:00Z&end=2024-01-02T00:00Z"
        );
    }
}
