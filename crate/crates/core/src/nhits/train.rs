use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NhitsConfig;
use super::model::{Batch, NhitsModel};
use super::swag::SwagState;
use crate::error::{Error, Result};
use crate::timeseries::WindowSet;

/// Examples per gradient shard. Fixed so results do not depend on the thread count.
const SHARD: usize = 32;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Linear warmup from zero, then cosine decay to zero at `n_epochs`.
pub fn learning_rate(config: &NhitsConfig, epoch: f64) -> f64 {
    let w = config.warmup_epochs as f64;
    let n = config.n_epochs as f64;
    if epoch < w {
        return config.lr * epoch / w;
    }
    if n <= w {
        return config.lr;
    }
    let progress = ((epoch - w) / (n - w)).clamp(0.0, 1.0);
    config.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(n: usize, weight_decay: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, weight_decay }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let update = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            *p -= lr * (update + self.weight_decay * *p);
        }
    }
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`. Returns the original norm.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Mean training-mode batch loss per epoch.
    pub train_mae: Vec<f64>,
    /// Eval-mode validation MAE per epoch; empty without validation windows.
    pub val_mae: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub swag_collections: Vec<usize>,
}

fn shard_rng(seed: u64, epoch: usize, step: usize, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d409);
    rng.set_stream(((epoch as u64) << 40) | ((step as u64) << 16) | shard as u64);
    rng
}

/// Mean absolute error and its gradient over one batch, sharded deterministically.
fn batch_gradient(model: &NhitsModel, ws: &WindowSet, indices: &[usize], epoch: usize, step: usize) -> Result<(f64, Vec<f64>)> {
    let total = (indices.len() * model.dims.horizon) as f64;
    let parts: Vec<Result<(f64, Vec<f64>)>> = indices
        .par_chunks(SHARD)
        .enumerate()
        .map(|(s, chunk)| {
            let batch = Batch::from_set(&model.dims, ws, chunk)?;
            let mut rng = shard_rng(model.config.seed, epoch, step, s);
            let (f, cache) = model.forward_batch(&model.params, &batch, Some(&mut rng))?;
            let diff = f - &batch.y;
            let loss = diff.iter().map(|d| d.abs()).sum::<f64>();
            let d_out = diff.map(|d| d.signum() * f64::from(u8::from(d != 0.0)) / total);
            let mut g = vec![0.0; model.n_params()];
            model.backward(&model.params, &batch, &cache, &d_out, &mut g);
            Ok((loss, g))
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.n_params()];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((loss / total, grad))
}

/// Eval-mode forecasts for every window, as columns.
pub fn predict_windows(model: &NhitsModel, params: &[f64], ws: &WindowSet) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = (0..ws.len()).collect();
    let parts: Vec<Result<DMatrix<f64>>> = idx
        .par_chunks(256)
        .map(|chunk| {
            let b = Batch::from_set(&model.dims, ws, chunk)?;
            Ok(model.forward_batch(params, &b, None)?.0)
        })
        .collect();
    let mut out = DMatrix::zeros(model.dims.horizon, ws.len());
    let mut c = 0;
    for p in parts {
        let p = p?;
        out.columns_mut(c, p.ncols()).copy_from(&p);
        c += p.ncols();
    }
    Ok(out)
}

/// Eval-mode mean absolute error on standardized targets.
pub fn evaluate_mae(model: &NhitsModel, params: &[f64], ws: &WindowSet) -> Result<f64> {
    if ws.is_empty() {
        return Err(Error::Empty("evaluation windows"));
    }
    let idx: Vec<usize> = (0..ws.len()).collect();
    let sums: Vec<Result<f64>> = idx
        .par_chunks(256)
        .map(|chunk| {
            let b = Batch::from_set(&model.dims, ws, chunk)?;
            let f = model.forward_batch(params, &b, None)?.0;
            Ok((f - &b.y).iter().map(|d| d.abs()).sum::<f64>())
        })
        .collect();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total / (ws.len() * model.dims.horizon) as f64)
}

/// Trains in place. With validation windows the best-validation parameters are restored.
pub fn train(model: &mut NhitsModel, train: &WindowSet, val: &WindowSet) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::Empty("training windows"));
    }
    let cfg = model.config.clone();
    let mut opt = AdamW::new(model.n_params(), cfg.weight_decay);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let steps = train.len().div_ceil(cfg.batch_size);
    let mut swag = cfg.swag.enabled.then(|| SwagState::new(cfg.swag.clone(), model.n_params()));
    let mut report = TrainReport {
        epochs_run: 0,
        train_mae: Vec::new(),
        val_mae: Vec::new(),
        best_epoch: None,
        stopped_early: false,
        swag_collections: Vec::new(),
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.n_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, mut grad) = batch_gradient(model, train, chunk, epoch, step)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("non-finite loss {loss} at step {step}"),
                });
            }
            clip_gradient(&mut grad, cfg.gradient_clip);
            let lr = learning_rate(&cfg, epoch as f64 + step as f64 / steps as f64);
            opt.step(&mut model.params, &grad, lr);
            epoch_loss += loss * chunk.len() as f64;
        }
        report.train_mae.push(epoch_loss / train.len() as f64);
        report.epochs_run = epoch + 1;
        model.state.epoch = epoch + 1;
        if let Some(s) = swag.as_mut() {
            if s.collect(&model.params, epoch)? {
                report.swag_collections.push(epoch);
            }
        }
        if val.is_empty() {
            continue;
        }
        let v = evaluate_mae(model, &model.params, val)?;
        report.val_mae.push(v);
        log::debug!("epoch {epoch}: train {:.5} val {v:.5}", report.train_mae[epoch]);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, model.params.clone()));
            report.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((v, params)) = best {
        model.params = params;
        model.state.best_val_mae = Some(v);
    }
    model.swag = swag.filter(|s| s.count > 0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let c = NhitsConfig::tiny_default();
        assert_eq!(learning_rate(&c, 0.0), 0.0);
        assert!((learning_rate(&c, 1.0) - 5e-4).abs() < 1e-15);
        assert_eq!(learning_rate(&c, 2.0), 1e-3);
        assert!(learning_rate(&c, 100.0).abs() < 1e-18);
        assert!(learning_rate(&c, 51.0) < 1e-3 && learning_rate(&c, 51.0) > 0.0);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_gradient(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = vec![0.1, 0.1];
        clip_gradient(&mut small, 1.0);
        assert_eq!(small, vec![0.1, 0.1]);
    }

    #[test]
    fn adamw_moves_against_gradient_and_decays() {
        let mut opt = AdamW::new(2, 0.0);
        let mut p = vec![1.0, 1.0];
        opt.step(&mut p, &[1.0, -1.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] - 1.1).abs() < 1e-6);
        let mut decay = AdamW::new(1, 0.5);
        let mut q = vec![2.0];
        decay.step(&mut q, &[0.0], 0.1);
        assert!((q[0] - 1.9).abs() < 1e-12);
    }
}
