use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::SwagConfig;
use crate::error::{Error, Result};

/// Running first and second moments of collected iterates plus a low-rank deviation buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwagState {
    pub config: SwagConfig,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the running mean.
    m2: Vec<f64>,
    pub count: usize,
    pub deviations: VecDeque<Vec<f64>>,
    pub collected_epochs: Vec<usize>,
}

impl SwagState {
    pub fn new(config: SwagConfig, n_params: usize) -> Self {
        Self {
            config,
            mean: vec![0.0; n_params],
            m2: vec![0.0; n_params],
            count: 0,
            deviations: VecDeque::new(),
            collected_epochs: Vec::new(),
        }
    }

    /// Collects `params` if the schedule selects `epoch`. Returns whether it did.
    pub fn collect(&mut self, params: &[f64], epoch: usize) -> Result<bool> {
        if params.len() != self.mean.len() {
            return Err(Error::Shape {
                expected: self.mean.len(),
                actual: params.len(),
            });
        }
        if !self.config.collects_at(epoch) {
            return Ok(false);
        }
        self.count += 1;
        let n = self.count as f64;
        let mut dev = Vec::with_capacity(params.len());
        for ((m, s), p) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(params) {
            let delta = p - *m;
            *m += delta / n;
            *s += delta * (p - *m);
            dev.push(p - *m);
        }
        self.deviations.push_back(dev);
        while self.deviations.len() > self.config.max_rank {
            self.deviations.pop_front();
        }
        self.collected_epochs.push(epoch);
        Ok(true)
    }

    /// Clamped diagonal variance.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|s| (s / n).max(self.config.var_clamp)).collect()
    }

    /// θ_SWA + scale·(√diag ⊙ z₁ + D z₂ / √(2(K−1))).
    pub fn sample(&self, seed: u64) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::domain(format!("SWAG sampling needs 2 collections, have {}", self.count)));
        }
        let scale = self.config.scale;
        if scale == 0.0 {
            return Ok(self.mean.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta: Vec<f64> = self
            .mean
            .iter()
            .zip(self.variance())
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + scale * v.sqrt() * z
            })
            .collect();
        let k = self.deviations.len();
        if k >= 2 {
            let c = scale / (2.0 * (k - 1) as f64).sqrt();
            for col in &self.deviations {
                let z: f64 = StandardNormal.sample(&mut rng);
                for (t, d) in theta.iter_mut().zip(col) {
                    *t += c * d * z;
                }
            }
        }
        Ok(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn every_epoch() -> SwagConfig {
        SwagConfig { start_epoch: 0, collect_every: 1, max_rank: 3, ..SwagConfig::default() }
    }

    #[test]
    fn schedule_and_fifo() {
        let mut s = SwagState::new(SwagConfig { collect_every: 4, max_rank: 2, ..SwagConfig::default() }, 2);
        for e in 0..20 {
            s.collect(&[e as f64, 0.0], e).unwrap();
        }
        assert_eq!(s.collected_epochs, vec![5, 9, 13, 17]);
        assert_eq!(s.deviations.len(), 2);
    }

    #[test]
    fn sampling_rules() {
        let mut s = SwagState::new(every_epoch(), 3);
        s.collect(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!(s.sample(0).is_err());
        s.collect(&[1.0, 2.0, 3.0], 1).unwrap();
        assert!(s.variance().iter().all(|v| *v == 1e-30));
        assert!(s.deviations.iter().flatten().all(|d| *d == 0.0));
        let theta = s.sample(4).unwrap();
        for (t, m) in theta.iter().zip(&s.mean) {
            assert!((t - m).abs() <= 1e-13);
        }
        s.collect(&[4.0, -2.0, 0.0], 2).unwrap();
        s.config.scale = 0.0;
        assert_eq!(s.sample(8).unwrap(), s.mean);
        s.config.scale = 1.0;
        assert_eq!(s.sample(8).unwrap(), s.sample(8).unwrap());
        assert_ne!(s.sample(8).unwrap(), s.sample(9).unwrap());
    }

    proptest! {
        #[test]
        fn mean_is_arithmetic_mean(iterates in prop::collection::vec(prop::collection::vec(-100f64..100.0, 4), 1..30)) {
            let mut s = SwagState::new(every_epoch(), 4);
            for (e, p) in iterates.iter().enumerate() {
                s.collect(p, e).unwrap();
            }
            for j in 0..4 {
                let m = iterates.iter().map(|p| p[j]).sum::<f64>() / iterates.len() as f64;
                prop_assert!((s.mean[j] - m).abs() <= 1e-12 * (1.0 + m.abs()));
            }
            prop_assert!(s.deviations.len() <= 3);
            prop_assert!(s.variance().iter().all(|v| *v >= 1e-30));
        }
    }
}
