use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::NaiveDate;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::features::{resolve_feature, PRICE};

/// Where and how to obtain one bidding zone's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub code: String,
    pub endpoint: String,
    #[serde(default = "default_features")]
    pub features: Vec<String>,
    pub cache_dir: PathBuf,
    #[serde(default = "default_timezone")]
    pub timezone: String,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
}

fn default_features() -> Vec<String> {
    vec![PRICE.to_string()]
}

fn default_timezone() -> String {
    "Europe/Berlin".into()
}

impl ZoneConfig {
    pub fn new(code: impl Into<String>, endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            code: code.into(),
            endpoint: endpoint.into(),
            features: default_features(),
            cache_dir: cache_dir.into(),
            timezone: default_timezone(),
            holidays: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.code.trim().is_empty() {
            return Err(Error::domain("zone code must not be empty"));
        }
        for f in &self.features {
            resolve_feature(f)?;
        }
        self.tz()?;
        Ok(())
    }

    pub fn tz(&self) -> Result<Tz> {
        self.timezone
            .parse()
            .map_err(|_| Error::domain(format!("unknown timezone `{}`", self.timezone)))
    }

    pub fn holiday_set(&self) -> BTreeSet<NaiveDate> {
        self.holidays.iter().copied().collect()
    }

    /// Cache file for one feature: `<cache_dir>/<zone>/<feature>.csv`.
    pub fn cache_path(&self, feature: &str) -> PathBuf {
        self.cache_dir.join(&self.code).join(format!("{feature}.csv"))
    }
}
