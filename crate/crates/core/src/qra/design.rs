use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::EnsembleForecast;
use crate::timeseries::{SampleWindow, WindowSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub use_mean_sd: bool,
    pub use_pca: bool,
    pub pca_var: f64,
    /// Keep every k-th draw column; 0 keeps all.
    pub sample_k: usize,
    pub covariates: bool,
    pub static_features: Vec<(String, f64)>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            use_mean_sd: false,
            use_pca: false,
            pca_var: 0.95,
            sample_k: 0,
            covariates: true,
            static_features: Vec::new(),
        }
    }
}

/// Principal axes of the draw columns at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Retained unit-norm components, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    /// Smallest leading set whose explained share reaches `var`.
    pub fn fit(rows: &[Vec<f64>], var: f64) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().ok_or(Error::Empty("PCA rows"))?.len();
        if d == 0 {
            return Err(Error::Empty("PCA columns"));
        }
        if !(var > 0.0 && var <= 1.0) {
            return Err(Error::domain(format!("pca_var {var} outside (0, 1]")));
        }
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let cov = centred.tr_mul(&centred) / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
        let values: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i].max(0.0)).collect();
        let total: f64 = values.iter().sum();
        let mut keep = 1;
        if total > 0.0 {
            let mut acc = 0.0;
            for (k, v) in values.iter().enumerate() {
                acc += v;
                if acc / total >= var - 1e-12 {
                    keep = k + 1;
                    break;
                }
            }
        }
        let components = order[..keep]
            .iter()
            .map(|i| eig.eigenvectors.column(*i).iter().copied().collect())
            .collect();
        Ok(Self {
            mean,
            components,
            explained: values[..keep].to_vec(),
            total_variance: total,
        })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += s * w;
            }
        }
        out
    }
}

/// Rows for one horizon, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonDesign {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl HorizonDesign {
    pub fn row(&self, i: usize, n_cols: usize) -> &[f64] {
        &self.x[i * n_cols..(i + 1) * n_cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QraDesign {
    pub columns: Vec<String>,
    pub origins: Vec<DateTime<Utc>>,
    pub horizons: Vec<HorizonDesign>,
    pub pca: Option<Vec<Pca>>,
}

impl QraDesign {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.origins.len()
    }
}

fn draw_indices(s: usize, k: usize) -> Vec<usize> {
    (0..s).filter(|i| k == 0 || i % k == 0).collect()
}

/// Builds per-horizon design matrices. PCA is fitted here unless `fitted` is supplied.
pub fn build_design(
    ensembles: &[EnsembleForecast],
    windows: &WindowSet,
    options: &DesignOptions,
    fitted: Option<&[Pca]>,
) -> Result<QraDesign> {
    if ensembles.len() != windows.len() {
        return Err(Error::Shape {
            expected: windows.len(),
            actual: ensembles.len(),
        });
    }
    let first = ensembles.first().ok_or(Error::Empty("ensembles"))?;
    let s = first.size();
    let horizon = windows.horizon;
    for (i, e) in ensembles.iter().enumerate() {
        if e.origin != windows.origin(i) {
            return Err(Error::Misaligned(e.origin));
        }
        if e.size() != s || e.horizon() != horizon {
            return Err(Error::Shape {
                expected: s,
                actual: e.size(),
            });
        }
    }
    let wins: Vec<SampleWindow> = windows.iter().collect();
    let known: Vec<usize> = (0..windows.frame().width())
        .filter(|j| options.covariates && windows.frame().kinds[*j].known_in_future())
        .collect();
    let draws = draw_indices(s, options.sample_k);
    let pca: Option<Vec<Pca>> = match (options.use_pca, fitted) {
        (false, _) => None,
        (true, Some(p)) => Some(p.to_vec()),
        (true, None) => Some(
            (0..horizon)
                .map(|h| {
                    let rows: Vec<Vec<f64>> = ensembles.iter().map(|e| draws.iter().map(|d| e.samples[*d][h]).collect()).collect();
                    Pca::fit(&rows, options.pca_var)
                })
                .collect::<Result<_>>()?,
        ),
    };
    if let Some(p) = &pca {
        if p.len() != horizon || p.iter().any(|q| q.mean.len() != draws.len()) {
            return Err(Error::Shape {
                expected: draws.len(),
                actual: p.first().map_or(0, |q| q.mean.len()),
            });
        }
    }
    // Horizons may retain different component counts; shorter score vectors are zero-padded.
    let draw_cols = match &pca {
        Some(p) => p.iter().map(|q| q.components.len()).max().unwrap_or(0),
        None => draws.len(),
    };
    let mut columns: Vec<String> = (0..draw_cols)
        .map(|k| if pca.is_some() { format!("pc{k}") } else { format!("draw{}", draws[k]) })
        .collect();
    if options.use_mean_sd {
        columns.push("mean".into());
        columns.push("sd".into());
    }
    for j in &known {
        columns.push(format!("cov:{}", windows.frame().names[*j]));
    }
    for (name, _) in &options.static_features {
        columns.push(format!("static:{name}"));
    }
    let f = columns.len();
    let mut horizons = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut x = Vec::with_capacity(ensembles.len() * f);
        let mut y = Vec::with_capacity(ensembles.len());
        for (e, w) in ensembles.iter().zip(&wins) {
            let vals: Vec<f64> = draws.iter().map(|d| e.samples[*d][h]).collect();
            match &pca {
                Some(p) => {
                    let mut scores = p[h].transform(&vals);
                    scores.resize(draw_cols, 0.0);
                    x.extend(scores);
                }
                None => x.extend_from_slice(&vals),
            }
            if options.use_mean_sd {
                let all = e.column(h);
                let m = all.iter().sum::<f64>() / all.len() as f64;
                let v = all.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / all.len() as f64;
                x.push(m);
                x.push(v.sqrt());
            }
            for j in &known {
                x.push(w.future[h][*j]);
            }
            for (_, v) in &options.static_features {
                x.push(*v);
            }
            y.push(w.target[h]);
        }
        horizons.push(HorizonDesign { x, y });
    }
    Ok(QraDesign {
        columns,
        origins: windows.origins(),
        horizons,
        pca,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_one_keeps_one_component() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| {
            let t = i as f64 * 0.3 - 4.0;
            vec![t, 2.0 * t, -t]
        }).collect();
        let p = Pca::fit(&rows, 0.95).unwrap();
        assert_eq!(p.components.len(), 1);
        let r = p.reconstruct(&p.transform(&rows[7]));
        for (a, b) in r.iter().zip(&rows[7]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn reconstruction_error_within_budget(
            data in prop::collection::vec(prop::collection::vec(-5f64..5.0, 4), 6..30),
            var in 0.5f64..0.99,
        ) {
            let p = Pca::fit(&data, var).unwrap();
            prop_assume!(p.total_variance > 1e-9);
            let n = data.len() as f64;
            let err: f64 = data.iter().map(|r| {
                let back = p.reconstruct(&p.transform(r));
                back.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }).sum::<f64>() / n;
            prop_assert!(err / p.total_variance <= 1.0 - var + 1e-9);
        }
    }
}
