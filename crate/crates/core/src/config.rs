//! Experiment configuration: one JSON document with a section per module.
//!
//! Loading starts from the built-in defaults, applies a named preset to the
//! `nhits` and `qra` sections when one is given, then merges the user's keys
//! on top. The root `seed` is propagated to every seeded component.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::BootstrapOptions;
use crate::carbon::{DEFAULT_INTENSITY, DEFAULT_PUE};
use crate::error::{Error, Result};
use crate::ingest::{DatasetSplits, ZoneConfig};
use crate::nhits::NhitsConfig;
use crate::pipeline::PipelineConfig;
use crate::qra::QraConfig;
use crate::stats::DEFAULT_ALPHA;
use crate::timeseries::FeatureGroup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub groups: Vec<FeatureGroup>,
    /// Add week-lagged copies of market covariates.
    pub proxies: bool,
    pub mask_value: f64,
    pub train_stride: usize,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            groups: Vec::new(),
            proxies: false,
            mask_value: 0.0,
            train_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSettings {
    pub alpha: f64,
    pub candidates: Vec<FeatureGroup>,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            candidates: FeatureGroup::CANDIDATES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonSettings {
    pub intensity: f64,
    pub pue: f64,
}

impl Default for CarbonSettings {
    fn default() -> Self {
        Self {
            intensity: DEFAULT_INTENSITY,
            pue: DEFAULT_PUE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub zones: Vec<ZoneConfig>,
    pub splits: DatasetSplits,
    pub features: FeatureSettings,
    pub nhits: NhitsConfig,
    pub qra: QraConfig,
    pub baseline: BootstrapOptions,
    pub selection: SelectionSettings,
    pub carbon: CarbonSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            zones: Vec::new(),
            splits: DatasetSplits::default(),
            features: FeatureSettings::default(),
            nhits: NhitsConfig::tiny_default(),
            qra: QraConfig::tiny_default(),
            baseline: BootstrapOptions::default(),
            selection: SelectionSettings::default(),
            carbon: CarbonSettings::default(),
        }
    }
}

/// Recursively overlays `over` onto `base`; non-object values replace.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn qra_preset(name: &str) -> Result<QraConfig> {
    match name {
        "tiny-default" => Ok(QraConfig::tiny_default()),
        "tiny-tuned" => Ok(QraConfig::tiny_tuned()),
        _ => Err(Error::domain(format!("unknown QRA preset `{name}`"))),
    }
}

fn take_preset(section: Option<&mut Value>) -> Result<Option<String>> {
    let Some(Value::Object(map)) = section else { return Ok(None) };
    match map.remove("preset") {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(Error::domain(format!("preset must be a string, got {other}"))),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut user: Value = serde_json::from_str(text)?;
        if !user.is_object() {
            return Err(Error::domain("configuration must be a JSON object"));
        }
        let nhits_preset = take_preset(user.get_mut("nhits"))?;
        let qra_preset_name = take_preset(user.get_mut("qra"))?;
        let mut base = Self::default();
        if let Some(p) = nhits_preset {
            base.nhits = NhitsConfig::preset(&p)?;
        }
        if let Some(p) = qra_preset_name {
            base.qra = qra_preset(&p)?;
        }
        let mut merged = serde_json::to_value(&base)?;
        merge(&mut merged, user);
        let mut cfg: Self = serde_json::from_value(merged)?;
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn propagate_seed(&mut self) {
        self.nhits.seed = self.seed;
        self.qra.solver.seed = self.seed;
        self.baseline.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.splits.validate()?;
        self.nhits.validate()?;
        self.qra.validate()?;
        for z in &self.zones {
            z.validate()?;
        }
        if self.features.train_stride == 0 {
            return Err(Error::domain("features.train_stride must be positive"));
        }
        if !(self.selection.alpha > 0.0 && self.selection.alpha < 1.0) {
            return Err(Error::domain("selection.alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn zone(&self, code: &str) -> Option<&ZoneConfig> {
        self.zones.iter().find(|z| z.code == code)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            nhits: self.nhits.clone(),
            qra: self.qra.clone(),
            splits: self.splits.clone(),
            mask_value: self.features.mask_value,
            train_stride: self.features.train_stride,
            seed: self.seed,
        }
    }

    /// Canonical JSON, used for hashing run manifests.
    pub fn canonical_json(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&v)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn preset_then_overrides() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 9, "nhits": {"preset": "tiny-tuned", "n_epochs": 3}, "qra": {"preset": "tiny-tuned"}}"#,
        )
        .unwrap();
        let tuned = NhitsConfig::tiny_tuned();
        assert_eq!(cfg.nhits.n_epochs, 3);
        assert_eq!(cfg.nhits.lr, tuned.lr);
        assert_eq!(cfg.nhits.mlp_units, tuned.mlp_units);
        assert_eq!(cfg.qra.samples, 8);
        assert_eq!((cfg.nhits.seed, cfg.qra.solver.seed, cfg.baseline.seed), (9, 9, 9));
    }

    #[test]
    fn invalid_documents_rejected() {
        assert!(ExperimentConfig::from_json("[]").is_err());
        assert!(ExperimentConfig::from_json(r#"{"nhits": {"preset": "huge"}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"selection": {"alpha": 2.0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"nhits": {"n_blocks": "x"}}"#).is_err());
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 4, "features": {"groups": ["R1", "R3"]}}"#).unwrap();
        let back = ExperimentConfig::from_json(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
