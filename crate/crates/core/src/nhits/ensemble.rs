use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{Batch, NhitsModel};
use super::train::predict_windows;
use crate::error::{Error, Result};
use crate::forecast::EnsembleForecast;
use crate::timeseries::{SampleWindow, WindowSet};

fn window_rng(seed: u64, window: &SampleWindow) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window.origin.timestamp() as u64);
    rng
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 1 {
        return Err(Error::domain("ensemble size must be >= 1"));
    }
    Ok(())
}

/// `samples` forward passes with independent dropout masks.
pub fn mc_dropout_ensemble(model: &NhitsModel, window: &SampleWindow, samples: usize, seed: u64) -> Result<EnsembleForecast> {
    check_samples(samples)?;
    let batch = Batch::from_windows(&model.dims, std::slice::from_ref(window))?.repeat(0, samples);
    let mut rng = window_rng(seed, window);
    let (f, _) = model.forward_batch(&model.params, &batch, Some(&mut rng))?;
    let rows = f.column_iter().map(|c| c.iter().copied().collect()).collect();
    EnsembleForecast::new(window.origin, rows)
}

pub fn mc_dropout_ensembles(model: &NhitsModel, ws: &WindowSet, samples: usize, seed: u64) -> Result<Vec<EnsembleForecast>> {
    check_samples(samples)?;
    (0..ws.len())
        .into_par_iter()
        .map(|i| mc_dropout_ensemble(model, &ws.get(i), samples, seed))
        .collect()
}

/// One SWAG weight draw per member, shared across windows; dropout off.
pub fn swag_ensembles(model: &NhitsModel, ws: &WindowSet, samples: usize, seed: u64) -> Result<Vec<EnsembleForecast>> {
    check_samples(samples)?;
    let swag = model.swag.as_ref().ok_or_else(|| Error::domain("model carries no SWAG state"))?;
    let draws: Vec<Vec<f64>> = (0..samples as u64).map(|s| swag.sample(seed.wrapping_add(s))).collect::<Result<_>>()?;
    let per_draw: Vec<nalgebra::DMatrix<f64>> = draws
        .iter()
        .map(|theta| predict_windows(model, theta, ws))
        .collect::<Result<_>>()?;
    (0..ws.len())
        .map(|i| {
            let rows = per_draw.iter().map(|m| m.column(i).iter().copied().collect()).collect();
            EnsembleForecast::new(ws.origin(i), rows)
        })
        .collect()
}

/// SWAG when the model was trained with it, MC-dropout otherwise.
pub fn ensembles(model: &NhitsModel, ws: &WindowSet, samples: usize, seed: u64) -> Result<Vec<EnsembleForecast>> {
    if model.config.swag.enabled && model.swag.as_ref().is_some_and(|s| s.count >= 2) {
        swag_ensembles(model, ws, samples, seed)
    } else {
        mc_dropout_ensembles(model, ws, samples, seed)
    }
}
