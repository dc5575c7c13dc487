use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{DesignOptions, Pca, QraDesign};
use super::isotonic::{interpolate_quantiles, isotonic_repair};
use super::solver::{fit_pinball_lasso, Problem, SolverConfig};
use crate::error::{Error, Result};
use crate::forecast::{check_levels, QuantileForecast};
use crate::ingest::csvio::write_atomic;
use crate::timeseries::standardize::STD_FLOOR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QraConfig {
    pub levels: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub solver: SolverConfig,
    pub design: DesignOptions,
    /// Keep every n-th fitting row.
    pub subsample_stride: usize,
    /// Trailing share of rows held out for early stopping and λ selection.
    pub validation_fraction: f64,
    /// Size of the uniform output grid; 0 keeps the fitted levels.
    pub uniform_levels: usize,
    /// Ensemble draws requested from the backbone.
    pub samples: usize,
}

impl QraConfig {
    pub fn tiny_default() -> Self {
        Self {
            levels: vec![0.01, 0.1, 0.5, 0.9, 0.99],
            lambda_grid: vec![0.0, 1e-4, 1e-3],
            solver: SolverConfig::default(),
            design: DesignOptions {
                use_pca: true,
                pca_var: 0.95,
                sample_k: 0,
                ..DesignOptions::default()
            },
            subsample_stride: 4,
            validation_fraction: 0.2,
            uniform_levels: 200,
            samples: 64,
        }
    }

    pub fn tiny_tuned() -> Self {
        let mut c = Self::tiny_default();
        c.samples = 8;
        c.solver.lr = 1.02e-4;
        c.design.use_pca = false;
        c.design.sample_k = 1;
        c.lambda_grid = vec![0.0, 1e-3];
        c.subsample_stride = 2;
        c
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(&self.levels)?;
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::domain("lambda_grid must be a non-empty list of non-negative values"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::domain("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One quantile regression in design units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Held-out pinball loss in standardized target units.
    pub val_loss: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QraModel {
    pub levels: Vec<f64>,
    pub columns: Vec<String>,
    pub design: DesignOptions,
    pub pca: Option<Vec<Pca>>,
    pub uniform_levels: usize,
    /// `fits[h][q]`.
    pub fits: Vec<Vec<QuantileFit>>,
}

struct Scaled {
    x: Vec<f64>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
    y_mean: f64,
    y_std: f64,
}

fn scale(x: &[f64], y: &[f64], f: usize, rows: &[usize]) -> Scaled {
    let n = rows.len() as f64;
    let mut x_mean = vec![0.0; f];
    let mut x_std = vec![0.0; f];
    for j in 0..f {
        let m = rows.iter().map(|i| x[i * f + j]).sum::<f64>() / n;
        let v = rows.iter().map(|i| (x[i * f + j] - m).powi(2)).sum::<f64>() / n;
        x_mean[j] = m;
        // Constant columns get an infinite scale, which pins their coefficient at 0.
        x_std[j] = if v.sqrt() < STD_FLOOR { f64::INFINITY } else { v.sqrt() };
    }
    let y_mean = rows.iter().map(|i| y[*i]).sum::<f64>() / n;
    let y_std = (rows.iter().map(|i| (y[*i] - y_mean).powi(2)).sum::<f64>() / n).sqrt().max(STD_FLOOR);
    let xs = x.iter().enumerate().map(|(k, v)| (v - x_mean[k % f]) / x_std[k % f]).collect();
    let ys = y.iter().map(|v| (v - y_mean) / y_std).collect();
    Scaled { x: xs, y: ys, x_mean, x_std, y_mean, y_std }
}

/// Chronological split into subsampled fitting rows and a trailing holdout.
pub fn split_rows(n: usize, stride: usize, validation_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut n_val = (n as f64 * validation_fraction).round() as usize;
    if n - n_val.min(n) < 2 {
        n_val = 0;
    }
    let n_fit = n - n_val;
    let fit = (0..n_fit).step_by(stride.max(1)).collect();
    (fit, (n_fit..n).collect())
}

impl QraModel {
    /// Fits one regression per (horizon, level), choosing λ by held-out pinball loss.
    pub fn fit(design: &QraDesign, config: &QraConfig) -> Result<Self> {
        config.validate()?;
        let n = design.n_rows();
        if n < 2 {
            return Err(Error::domain(format!("QRA needs at least 2 rows per horizon, got {n}")));
        }
        let f = design.n_cols();
        let (fit_rows, val_rows) = split_rows(n, config.subsample_stride, config.validation_fraction);
        let q = config.levels.len();
        let pairs: Vec<(usize, usize)> = (0..design.horizons.len()).flat_map(|h| (0..q).map(move |k| (h, k))).collect();
        let scaled: Vec<Scaled> = design
            .horizons
            .par_iter()
            .map(|hd| scale(&hd.x, &hd.y, f, &fit_rows))
            .collect();
        let fits: Vec<QuantileFit> = pairs
            .par_iter()
            .map(|(h, k)| {
                let s = &scaled[*h];
                let tau = config.levels[*k];
                let problem = Problem { x: &s.x, y: &s.y, n_cols: f };
                let solver = SolverConfig {
                    seed: config.solver.seed.wrapping_add((*h * 1000 + *k) as u64),
                    ..config.solver.clone()
                };
                let best = config
                    .lambda_grid
                    .iter()
                    .map(|lambda| fit_pinball_lasso(problem, &fit_rows, &val_rows, tau, *lambda, &solver))
                    .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
                    .expect("non-empty lambda grid");
                let beta: Vec<f64> = best.beta.iter().zip(&s.x_std).map(|(b, sd)| b * s.y_std / sd).collect();
                let intercept = s.y_mean + s.y_std * best.intercept - beta.iter().zip(&s.x_mean).map(|(b, m)| b * m).sum::<f64>();
                QuantileFit {
                    beta,
                    intercept,
                    lambda: best.lambda,
                    val_loss: best.val_loss,
                    epochs_run: best.epochs_run,
                }
            })
            .collect();
        if fits.iter().any(|fit| fit.beta.iter().any(|b| !b.is_finite()) || !fit.intercept.is_finite()) {
            return Err(Error::domain("QRA produced non-finite coefficients"));
        }
        let full = fits.iter().filter(|fit| fit.epochs_run == config.solver.n_epochs).count();
        if full > 0 {
            log::warn!("{full} of {} quantile fits used every epoch without early stopping", fits.len());
        }
        let mut per_h = Vec::with_capacity(design.horizons.len());
        let mut it = fits.into_iter();
        for _ in 0..design.horizons.len() {
            per_h.push(it.by_ref().take(q).collect());
        }
        Ok(Self {
            levels: config.levels.clone(),
            columns: design.columns.clone(),
            design: config.design.clone(),
            pca: design.pca.clone(),
            uniform_levels: config.uniform_levels,
            fits: per_h,
        })
    }

    /// Xβ + b for every origin; levels may cross.
    pub fn predict_raw(&self, design: &QraDesign) -> Result<Vec<QuantileForecast>> {
        if design.columns != self.columns {
            return Err(Error::Shape {
                expected: self.columns.len(),
                actual: design.columns.len(),
            });
        }
        if design.horizons.len() != self.fits.len() {
            return Err(Error::Shape {
                expected: self.fits.len(),
                actual: design.horizons.len(),
            });
        }
        let f = design.n_cols();
        (0..design.n_rows())
            .map(|i| {
                let values = (0..self.levels.len())
                    .map(|k| {
                        design
                            .horizons
                            .iter()
                            .zip(&self.fits)
                            .map(|(hd, fits)| {
                                let fit = &fits[k];
                                hd.row(i, f).iter().zip(&fit.beta).map(|(x, b)| x * b).sum::<f64>() + fit.intercept
                            })
                            .collect()
                    })
                    .collect();
                QuantileForecast::new(design.origins[i], self.levels.clone(), values)
            })
            .collect()
    }

    /// Raw quantiles, isotonic repair per horizon, then the uniform grid.
    pub fn forecast(&self, design: &QraDesign) -> Result<Vec<QuantileForecast>> {
        self.predict_raw(design)?
            .into_iter()
            .map(|raw| {
                let repaired = repair(&raw)?;
                let out = if self.uniform_levels > 0 {
                    interpolate_quantiles(&repaired, self.uniform_levels)?
                } else {
                    repaired
                };
                if !out.is_monotone() {
                    return Err(Error::Crossing { index: 0 });
                }
                Ok(out)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Isotonic repair of every horizon column.
pub fn repair(forecast: &QuantileForecast) -> Result<QuantileForecast> {
    let h = forecast.horizon();
    let mut values = forecast.values.clone();
    for c in 0..h {
        let fixed = isotonic_repair(&forecast.column(c));
        for (row, v) in values.iter_mut().zip(fixed) {
            row[c] = v;
        }
    }
    QuantileForecast::new(forecast.origin, forecast.levels.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qra::design::HorizonDesign;
    use chrono::{Duration, TimeZone, Utc};

    fn design(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, columns: Vec<String>) -> QraDesign {
        let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let n = y[0].len();
        QraDesign {
            columns,
            origins: (0..n).map(|i| t0 + Duration::days(i as i64)).collect(),
            horizons: x.into_iter().zip(y).map(|(x, y)| HorizonDesign { x, y }).collect(),
            pca: None,
        }
    }

    #[test]
    fn hand_set_prediction() {
        let d = design(vec![vec![5.0]], vec![vec![0.0]], vec!["a".into()]);
        let m = QraModel {
            levels: vec![0.1, 0.9],
            columns: vec!["a".into()],
            design: DesignOptions::default(),
            pca: None,
            uniform_levels: 0,
            fits: vec![vec![
                QuantileFit { beta: vec![1.0], intercept: 0.0, lambda: 0.0, val_loss: 0.0, epochs_run: 0 },
                QuantileFit { beta: vec![1.0], intercept: 0.0, lambda: 0.0, val_loss: 0.0, epochs_run: 0 },
            ]],
        };
        let raw = m.predict_raw(&d).unwrap();
        assert_eq!(raw[0].values, vec![vec![5.0], vec![5.0]]);
        let wrong = design(vec![vec![5.0, 1.0]], vec![vec![0.0]], vec!["a".into(), "b".into()]);
        assert!(m.predict_raw(&wrong).is_err());
    }

    #[test]
    fn crossing_raw_outputs_are_repaired() {
        let d = design(vec![vec![1.0, 2.0]], vec![vec![0.0, 0.0]], vec!["a".into()]);
        let fit = |b: f64, c: f64| QuantileFit { beta: vec![b], intercept: c, lambda: 0.0, val_loss: 0.0, epochs_run: 0 };
        let m = QraModel {
            levels: vec![0.1, 0.5, 0.9],
            columns: vec!["a".into()],
            design: DesignOptions::default(),
            pca: None,
            uniform_levels: 200,
            fits: vec![vec![fit(0.0, 3.0), fit(0.0, 1.0), fit(0.0, 2.0)]],
        };
        let out = m.forecast(&d).unwrap();
        assert!(out.iter().all(QuantileForecast::is_monotone));
        assert!(out[0].values.iter().all(|r| (r[0] - 2.0).abs() < 1e-12));
    }

    #[test]
    fn model_json_round_trip() {
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let d = design(vec![y.clone()], vec![y], vec!["a".into()]);
        let mut cfg = QraConfig::tiny_default();
        cfg.solver.n_epochs = 5;
        let m = QraModel::fit(&d, &cfg).unwrap();
        assert_eq!(QraModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let n = 60;
        let y: Vec<f64> = (0..n).map(|i| 50.0 + 10.0 * (i as f64 * 0.7).sin()).collect();
        let x: Vec<f64> = y.iter().flat_map(|v| [*v, 0.5]).collect();
        let d = design(vec![x], vec![y], vec!["a".into(), "month".into()]);
        let mut cfg = QraConfig::tiny_default();
        cfg.solver.n_epochs = 50;
        let m = QraModel::fit(&d, &cfg).unwrap();
        assert!(m.fits[0].iter().all(|f| f.beta[1] == 0.0 && f.intercept.is_finite()));
        // A shifted value of the constant column no longer moves the forecast.
        let shifted = design(vec![vec![50.0, 0.9]], vec![vec![50.0]], vec!["a".into(), "month".into()]);
        let base = design(vec![vec![50.0, 0.5]], vec![vec![50.0]], vec!["a".into(), "month".into()]);
        assert_eq!(m.predict_raw(&shifted).unwrap()[0].values, m.predict_raw(&base).unwrap()[0].values);
    }

    #[test]
    fn split_keeps_two_fit_rows() {
        assert_eq!(split_rows(10, 2, 0.2), (vec![0, 2, 4, 6], vec![8, 9]));
        assert_eq!(split_rows(2, 1, 0.5), (vec![0, 1], vec![]));
    }
}
