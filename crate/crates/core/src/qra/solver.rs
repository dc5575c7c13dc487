use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scoring::pinball;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    /// Start the intercept at the empirical quantile of the training targets.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_epochs: 200,
            batch_size: 512,
            lr: 1e-4,
            patience: 10,
            warm_start: true,
            seed: 0,
        }
    }
}

/// Row-major design with its target.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub n_cols: usize,
}

impl Problem<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    fn predict(&self, i: usize, beta: &[f64], b: f64) -> f64 {
        self.row(i).iter().zip(beta).map(|(x, w)| x * w).sum::<f64>() + b
    }

    pub fn pinball(&self, rows: &[usize], tau: f64, beta: &[f64], b: f64) -> f64 {
        rows.iter().map(|i| pinball(tau, self.y[*i] - self.predict(*i, beta, b))).sum::<f64>() / rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Monitored loss at the returned iterate.
    pub val_loss: f64,
    pub epochs_run: usize,
    /// Monitored loss at every improving epoch, in order.
    pub checkpoints: Vec<f64>,
    pub stopped_early: bool,
}

/// Smallest order statistic with at least a `tau` share of values at or below it.
pub fn empirical_quantile(values: &[f64], tau: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((tau * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Mini-batch Adam on the pinball subgradient with a proximal L1 step on β.
///
/// Early stopping monitors pinball loss on `val` rows, or the penalised training
/// objective when `val` is empty.
pub fn fit_pinball_lasso(p: Problem<'_>, train: &[usize], val: &[usize], tau: f64, lambda: f64, cfg: &SolverConfig) -> LassoFit {
    let f = p.n_cols;
    let mut beta = vec![0.0; f];
    let train_y: Vec<f64> = train.iter().map(|i| p.y[*i]).collect();
    let mut b = if cfg.warm_start && !train_y.is_empty() { empirical_quantile(&train_y, tau) } else { 0.0 };
    let monitor = |beta: &[f64], b: f64| {
        if val.is_empty() {
            p.pinball(train, tau, beta, b) + lambda * beta.iter().map(|w| w.abs()).sum::<f64>()
        } else {
            p.pinball(val, tau, beta, b)
        }
    };
    let mut best = (monitor(&beta, b), beta.clone(), b);
    let mut checkpoints = vec![best.0];
    let (mut m, mut v) = (vec![0.0; f + 1], vec![0.0; f + 1]);
    let mut t = 0i32;
    let mut order = train.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = cfg.batch_size.max(1);
    let total_steps = (cfg.n_epochs * order.len().div_ceil(batch)).max(1) as f64;
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut stopped_early = false;
    let mut grad = vec![0.0; f + 1];
    for _epoch in 0..cfg.n_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in chunk {
                let u = p.y[*i] - p.predict(*i, &beta, b);
                let g = if u < 0.0 { 1.0 - tau } else { -tau };
                for (gj, xj) in grad.iter_mut().zip(p.row(*i)) {
                    *gj += g * xj;
                }
                grad[f] += g;
            }
            let scale = 1.0 / chunk.len() as f64;
            let lr = cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / total_steps).cos());
            t += 1;
            let c1 = 1.0 - 0.9f64.powi(t);
            let c2 = 1.0 - 0.999f64.powi(t);
            for k in 0..=f {
                let g = grad[k] * scale;
                m[k] = 0.9 * m[k] + 0.1 * g;
                v[k] = 0.999 * v[k] + 0.001 * g * g;
                let step = lr * (m[k] / c1) / ((v[k] / c2).sqrt() + 1e-8);
                if k < f {
                    beta[k] = soft_threshold(beta[k] - step, lr * lambda);
                } else {
                    b -= step;
                }
            }
        }
        epochs_run += 1;
        let loss = monitor(&beta, b);
        if loss < best.0 {
            best = (loss, beta.clone(), b);
            checkpoints.push(loss);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    LassoFit {
        beta: best.1,
        intercept: best.2,
        lambda,
        val_loss: best.0,
        epochs_run,
        checkpoints,
        stopped_early,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_one_to_five() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = Problem { x: &[], y: &y, n_cols: 0 };
        let rows: Vec<usize> = (0..5).collect();
        let cfg = SolverConfig { warm_start: false, lr: 0.05, n_epochs: 400, batch_size: 5, patience: 400, ..Default::default() };
        let fit = fit_pinball_lasso(p, &rows, &[], 0.5, 0.0, &cfg);
        assert!((fit.intercept - 3.0).abs() < 0.05, "{}", fit.intercept);
        // Brute force over a grid agrees.
        let grid_best = (0..=600)
            .map(|k| k as f64 / 100.0)
            .min_by(|a, b| p.pinball(&rows, 0.5, &[], *a).total_cmp(&p.pinball(&rows, 0.5, &[], *b)))
            .unwrap();
        assert!((grid_best - 3.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_predictor_beats_intercept() {
        let y: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let p = Problem { x: &y, y: &y, n_cols: 1 };
        let train: Vec<usize> = (0..160).collect();
        let val: Vec<usize> = (160..200).collect();
        let cfg = SolverConfig { lr: 0.01, batch_size: 32, ..Default::default() };
        let fit = fit_pinball_lasso(p, &train, &val, 0.9, 0.0, &cfg);
        let intercept_only = p.pinball(&val, 0.9, &[0.0], empirical_quantile(&y[..160], 0.9));
        assert!(fit.val_loss < intercept_only);
        assert!(fit.checkpoints.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn huge_penalty_zeroes_coefficients() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let p = Problem { x: &x, y: &y, n_cols: 1 };
        let rows: Vec<usize> = (0..100).collect();
        let fit = fit_pinball_lasso(p, &rows, &[], 0.5, 1e6, &SolverConfig { lr: 0.01, ..Default::default() });
        assert!(fit.beta.iter().map(|b| b.abs()).sum::<f64>() < 1e-6);
    }

    #[test]
    fn empirical_quantile_minimises_pinball() {
        let y = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(empirical_quantile(&y, 0.5), 3.0);
        assert_eq!(empirical_quantile(&y, 0.01), 1.0);
        assert_eq!(empirical_quantile(&y, 0.99), 5.0);
    }
}
