use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Average,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwagConfig {
    pub enabled: bool,
    pub start_epoch: usize,
    pub collect_every: usize,
    pub max_rank: usize,
    pub var_clamp: f64,
    pub scale: f64,
}

impl Default for SwagConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            start_epoch: 5,
            collect_every: 1,
            max_rank: 20,
            var_clamp: 1e-30,
            scale: 1.0,
        }
    }
}

impl SwagConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// SWAG settings of the tuned small and base models.
    pub fn tuned() -> Self {
        Self {
            enabled: true,
            start_epoch: 5,
            collect_every: 4,
            max_rank: 10,
            var_clamp: 1e-30,
            scale: 0.5,
        }
    }

    pub fn collects_at(&self, epoch: usize) -> bool {
        self.enabled && epoch >= self.start_epoch && (epoch - self.start_epoch).is_multiple_of(self.collect_every.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NhitsConfig {
    pub n_blocks: Vec<usize>,
    pub mlp_units: Vec<Vec<usize>>,
    pub dropout_prob_theta: f64,
    pub n_pool_kernel_size: Vec<usize>,
    pub n_freq_downsample: Vec<usize>,
    #[serde(default)]
    pub pool_mode: PoolMode,
    pub lr: f64,
    pub warmup_epochs: usize,
    pub n_epochs: usize,
    pub batch_size: usize,
    pub gradient_clip: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub seed: u64,
    pub swag: SwagConfig,
}

pub const PRESETS: [&str; 6] = ["tiny-default", "tiny-tuned", "small-default", "small-tuned", "base-default", "base-tuned"];

impl NhitsConfig {
    fn common(n_blocks: Vec<usize>, mlp_units: Vec<Vec<usize>>, kernels: Vec<usize>, downsample: Vec<usize>) -> Self {
        Self {
            n_blocks,
            mlp_units,
            dropout_prob_theta: 0.1,
            n_pool_kernel_size: kernels,
            n_freq_downsample: downsample,
            pool_mode: PoolMode::Average,
            lr: 1e-3,
            warmup_epochs: 2,
            n_epochs: 100,
            batch_size: 128,
            gradient_clip: 1.0,
            weight_decay: 0.01,
            patience: 10,
            seed: 0,
            swag: SwagConfig::default(),
        }
    }

    pub fn tiny_default() -> Self {
        Self::common(vec![2, 2], vec![vec![16, 16]; 2], vec![4, 2], vec![4, 2])
    }

    pub fn tiny_tuned() -> Self {
        Self {
            lr: 5.552e-5,
            dropout_prob_theta: 0.154,
            swag: SwagConfig::disabled(),
            ..Self::common(vec![1, 1], vec![vec![32, 32]; 2], vec![2, 2], vec![2, 2])
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "tiny-default" => Self::tiny_default(),
            "tiny-tuned" => Self::tiny_tuned(),
            "small-default" => Self::common(vec![2, 2, 2], vec![vec![96, 96]; 3], vec![4, 2, 1], vec![4, 2, 1]),
            "small-tuned" => Self {
                lr: 1.1929e-4,
                dropout_prob_theta: 0.141,
                swag: SwagConfig::tuned(),
                ..Self::common(vec![2; 4], vec![vec![96, 96]; 4], vec![8, 4, 2, 2], vec![4, 2, 2, 1])
            },
            "base-default" => Self::common(vec![3, 3, 3], vec![vec![256, 256, 256]; 3], vec![4, 2, 1], vec![4, 2, 1]),
            "base-tuned" => Self {
                lr: 6.1802e-5,
                dropout_prob_theta: 0.1183,
                swag: SwagConfig::tuned(),
                ..Self::common(vec![2; 4], vec![vec![256, 256, 256]; 4], vec![16, 8, 4, 2], vec![16, 8, 4, 2])
            },
            other => return Err(Error::domain(format!("unknown NHITS preset {other:?}; expected one of {PRESETS:?}"))),
        })
    }

    pub fn stacks(&self) -> usize {
        self.n_blocks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stacks();
        if s == 0 {
            return Err(Error::domain("NHITS needs at least one stack"));
        }
        for (name, len) in [
            ("mlp_units", self.mlp_units.len()),
            ("n_pool_kernel_size", self.n_pool_kernel_size.len()),
            ("n_freq_downsample", self.n_freq_downsample.len()),
        ] {
            if len != s {
                return Err(Error::domain(format!("{name} has {len} stacks, n_blocks has {s}")));
            }
        }
        if self.n_pool_kernel_size.iter().chain(&self.n_freq_downsample).any(|k| *k == 0) {
            return Err(Error::domain("pool kernels and downsample factors must be >= 1"));
        }
        if self.mlp_units.iter().any(|u| u.is_empty() || u.contains(&0)) {
            return Err(Error::domain("every stack needs at least one non-empty hidden layer"));
        }
        if !(0.0..1.0).contains(&self.dropout_prob_theta) {
            return Err(Error::domain("dropout_prob_theta must lie in [0, 1)"));
        }
        if self.batch_size == 0 || !(self.lr >= 0.0) || !(self.gradient_clip > 0.0) {
            return Err(Error::domain("batch_size, lr and gradient_clip must be positive"));
        }
        if self.swag.enabled && (self.swag.max_rank == 0 || self.swag.collect_every == 0) {
            return Err(Error::domain("SWAG max_rank and collect_every must be >= 1"));
        }
        Ok(())
    }
}
