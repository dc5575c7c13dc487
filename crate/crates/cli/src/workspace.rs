//! Workspace layout, run manifests and artifact digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use epf_core::config::ExperimentConfig;
use epf_core::ingest::csvio::write_atomic;
use epf_core::ingest::ZoneConfig;
use epf_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CONFIG_FILE: &str = "config.json";
pub const DEFAULT_ENDPOINT: &str = "https://api.energy-charts.info";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: ExperimentConfig,
    pub config_hash: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Workspace {
    /// Loads `config` (relative to `root`), or `config.json` when present, or the defaults.
    pub fn open(root: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let path = match config {
            Some(p) => Some(root.join(p)),
            None => Some(root.join(CONFIG_FILE)).filter(|p| p.exists()),
        };
        let mut cfg = match &path {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
            cfg.propagate_seed();
        }
        let config_hash = sha256_hex(cfg.canonical_json()?.as_bytes());
        let mut ws = Self {
            root: root.to_path_buf(),
            config: cfg,
            config_hash,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        if let Some(p) = path {
            ws.record_input(&p)?;
        }
        Ok(ws)
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        let rel = rel.as_ref();
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.root.join(rel)
        }
    }

    fn key(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    fn digest(path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok(sha256_hex(&bytes))
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let d = Self::digest(path)?;
        self.inputs.insert(self.key(path), d);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let d = Self::digest(path)?;
        self.outputs.insert(self.key(path), d);
        Ok(())
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        write_atomic(&path, contents)?;
        self.record_output(&path)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(rel, &text)
    }

    /// Zone settings from the config, or defaults caching under `data/`; cache paths are workspace-relative.
    pub fn zone(&self, code: &str) -> ZoneConfig {
        let mut z = self
            .config
            .zone(code)
            .cloned()
            .unwrap_or_else(|| ZoneConfig::new(code, DEFAULT_ENDPOINT, "data"));
        z.cache_dir = self.path(&z.cache_dir);
        z
    }

    /// Writes `runs/<subcommand>-<args digest>.json` and returns its path.
    pub fn finish(mut self, subcommand: &str, args: &serde_json::Value) -> Result<PathBuf> {
        let args_text = serde_json::to_string(args)?;
        let tag = &sha256_hex(args_text.as_bytes())[..12];
        let manifest = Manifest {
            tool: "epf",
            version: env!("CARGO_PKG_VERSION"),
            git_describe: env!("EPF_GIT_DESCRIBE"),
            subcommand,
            args,
            config_hash: &self.config_hash,
            seed: self.config.seed,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.path(format!("runs/{subcommand}-{tag}.json"));
        write_atomic(&path, &text)?;
        self.outputs.clear();
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    git_describe: &'static str,
    subcommand: &'a str,
    args: &'a serde_json::Value,
    config_hash: &'a str,
    seed: u64,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}
