//! End-to-end NHITS+QRA run on one zone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{EnsembleForecast, ForecastDistribution, QuantileForecast};
use crate::ingest::{build_splits, DatasetSplits, Strategy};
use crate::nhits::{ensembles, train, NhitsConfig, NhitsDims, NhitsModel, TrainReport};
use crate::qra::{build_design, QraConfig, QraModel};
use crate::scoring::{ScoreSeries, ScoreTable};
use crate::timeseries::{FeatureFrame, HourlySeries, Standardizer, WindowSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub nhits: NhitsConfig,
    pub qra: QraConfig,
    pub splits: DatasetSplits,
    /// Value written over masked covariates, in standardized units.
    pub mask_value: f64,
    /// Keep every n-th training window.
    pub train_stride: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn tiny_default(splits: DatasetSplits) -> Self {
        Self {
            nhits: NhitsConfig::tiny_default(),
            qra: QraConfig::tiny_default(),
            splits,
            mask_value: 0.0,
            train_stride: 1,
            seed: 0,
        }
    }
}

pub struct PipelineOutput {
    pub model: NhitsModel,
    pub qra: QraModel,
    pub report: TrainReport,
    pub validation_ensembles: Vec<EnsembleForecast>,
    pub test_ensembles: Vec<EnsembleForecast>,
    pub test_quantiles: Vec<QuantileForecast>,
}

/// Maps standardized target draws back to price units.
pub fn destandardize(forecasts: Vec<EnsembleForecast>, s: &Standardizer) -> Vec<EnsembleForecast> {
    forecasts
        .into_iter()
        .map(|mut f| {
            for row in &mut f.samples {
                row.iter_mut().for_each(|v| *v = s.invert(0, *v));
            }
            f
        })
        .collect()
}

/// Trains the backbone, fits QRA on validation-origin ensembles and forecasts the test origins.
pub fn run(frame: &FeatureFrame, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if cfg.train_stride == 0 {
        return Err(Error::domain("train_stride must be positive"));
    }
    cfg.qra.validate()?;
    let standardizer = frame.fit_standardizer(cfg.splits.train)?;
    let z = frame.standardized(&standardizer)?;
    let scaled = build_splits(&cfg.splits, Strategy::Full, &z, &[])?;
    let raw = build_splits(&cfg.splits, Strategy::Full, frame, &[])?;
    let sets = Sets {
        train: scaled.target.train.thin(cfg.train_stride),
        validation: scaled.target.validation,
        validation_raw: raw.target.validation,
        test: scaled.target.test,
        test_raw: raw.target.test,
    };
    fit_and_forecast(sets, standardizer, z.names.clone(), cfg)
}

/// Zero/one/few-shot run: train on pooled donors plus the target increment.
///
/// Standardization statistics are pooled over the donors' training rows, and
/// QRA is fitted on the donors' validation origins.
pub fn run_xshot(target: &FeatureFrame, donors: &[&FeatureFrame], strategy: Strategy, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if strategy == Strategy::Full {
        return run(target, cfg);
    }
    if cfg.train_stride == 0 {
        return Err(Error::domain("train_stride must be positive"));
    }
    cfg.qra.validate()?;
    let donors: Vec<&FeatureFrame> = donors.iter().copied().filter(|d| d.zone != target.zone).collect();
    if donors.is_empty() {
        return Err(Error::domain("x-shot strategies need at least one donor zone"));
    }
    let parts: Vec<FeatureFrame> = donors.iter().map(|d| d.slice(cfg.splits.train)).collect();
    let width = target.width();
    if let Some(bad) = parts.iter().find(|p| p.names != target.names) {
        return Err(Error::Schema {
            column: bad.zone.clone(),
            message: "donor columns differ from the target zone".into(),
        });
    }
    let pooled: Vec<Vec<f64>> = (0..width)
        .map(|j| parts.iter().flat_map(|p| p.columns[j].iter().copied()).collect())
        .collect();
    let refs: Vec<&[f64]> = pooled.iter().map(Vec::as_slice).collect();
    let standardizer = Standardizer::fit_columns(&refs)?;
    let z_target = target.standardized(&standardizer)?;
    let z_donors: Vec<FeatureFrame> = donors.iter().map(|d| d.standardized(&standardizer)).collect::<Result<_>>()?;
    let z_refs: Vec<&FeatureFrame> = z_donors.iter().collect();
    let scaled = build_splits(&cfg.splits, strategy, &z_target, &z_refs)?;
    let raw = build_splits(&cfg.splits, strategy, target, &donors)?;

    let mut train_sets: Vec<WindowSet> = scaled.donors.values().map(|z| z.train.clone().thin(cfg.train_stride)).collect();
    train_sets.push(scaled.target.train.clone());
    let sets = Sets {
        train: WindowSet::concat(&train_sets)?,
        validation: WindowSet::concat(&scaled.donors.values().map(|z| z.validation.clone()).collect::<Vec<_>>())?,
        validation_raw: WindowSet::concat(&raw.donors.values().map(|z| z.validation.clone()).collect::<Vec<_>>())?,
        test: scaled.target.test,
        test_raw: raw.target.test,
    };
    fit_and_forecast(sets, standardizer, z_target.names.clone(), cfg)
}

/// Trains the backbone and returns per-origin CRPS of its validation ensembles.
pub fn validation_crps(frame: &FeatureFrame, cfg: &PipelineConfig) -> Result<ScoreSeries> {
    if cfg.train_stride == 0 {
        return Err(Error::domain("train_stride must be positive"));
    }
    let standardizer = frame.fit_standardizer(cfg.splits.train)?;
    let z = frame.standardized(&standardizer)?;
    let scaled = build_splits(&cfg.splits, Strategy::Full, &z, &[])?;
    let train_ws = scaled.target.train.thin(cfg.train_stride).masked(cfg.mask_value);
    let val_ws = scaled.target.validation.masked(cfg.mask_value);
    let mut nhits_cfg = cfg.nhits.clone();
    nhits_cfg.seed = cfg.seed;
    let mut model = NhitsModel::new(nhits_cfg, NhitsDims::for_windows(&train_ws))?;
    train(&mut model, &train_ws, &val_ws)?;
    let draws = destandardize(ensembles(&model, &val_ws, cfg.qra.samples, cfg.seed)?, &standardizer);
    let forecasts: Vec<ForecastDistribution> = draws.into_iter().map(ForecastDistribution::Ensemble).collect();
    let actual = HourlySeries::new(frame.zone.clone(), frame.timestamps.clone(), frame.target().to_vec())?;
    ScoreTable::compute(&forecasts, &actual)?.series("crps")
}

struct Sets {
    train: WindowSet,
    validation: WindowSet,
    validation_raw: WindowSet,
    test: WindowSet,
    test_raw: WindowSet,
}

fn fit_and_forecast(sets: Sets, standardizer: Standardizer, names: Vec<String>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let train_ws = sets.train.masked(cfg.mask_value);
    let val_ws = sets.validation.masked(cfg.mask_value);
    let test_ws = sets.test.masked(cfg.mask_value);

    let mut nhits_cfg = cfg.nhits.clone();
    nhits_cfg.seed = cfg.seed;
    let mut model = NhitsModel::new(nhits_cfg, NhitsDims::for_windows(&train_ws))?;
    model.standardizer = Some(standardizer.clone());
    model.feature_names = names;
    let report = train(&mut model, &train_ws, &val_ws)?;
    log::info!(
        "backbone trained for {} epochs, best validation MAE {:?}",
        report.epochs_run,
        model.state.best_val_mae
    );

    let samples = cfg.qra.samples;
    let validation_ensembles = destandardize(ensembles(&model, &val_ws, samples, cfg.seed)?, &standardizer);
    let test_ensembles = destandardize(ensembles(&model, &test_ws, samples, cfg.seed.wrapping_add(1))?, &standardizer);

    let qra = fit_qra(&validation_ensembles, &sets.validation_raw, &cfg.qra)?;
    let test_quantiles = predict_qra(&qra, &test_ensembles, &sets.test_raw)?;
    Ok(PipelineOutput {
        model,
        qra,
        report,
        validation_ensembles,
        test_ensembles,
        test_quantiles,
    })
}

pub fn fit_qra(ensembles: &[EnsembleForecast], windows: &WindowSet, cfg: &QraConfig) -> Result<QraModel> {
    let design = build_design(ensembles, windows, &cfg.design, None)?;
    QraModel::fit(&design, cfg)
}

pub fn predict_qra(model: &QraModel, ensembles: &[EnsembleForecast], windows: &WindowSet) -> Result<Vec<QuantileForecast>> {
    let design = build_design(ensembles, windows, &model.design, model.pca.as_deref())?;
    model.forecast(&design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};
    use crate::timeseries::Interval;
    use chrono::{TimeZone, Utc};
    use std::collections::BTreeSet;

    fn frame(zone: &str, seed: u64) -> FeatureFrame {
        let start = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let mut spec = SyntheticSpec::new(start, 24 * 120, seed);
        spec.zone = zone.into();
        let m = generate(&spec).unwrap();
        FeatureFrame::assemble(&m.price, &[], chrono_tz::UTC, &BTreeSet::new(), false).unwrap()
    }

    fn config() -> PipelineConfig {
        let d = |m, day| Utc.with_ymd_and_hms(2023, m, day, 0, 0, 0).unwrap();
        let splits = DatasetSplits {
            train: Interval::new(d(1, 1), d(3, 1)).unwrap(),
            validation: Interval::new(d(3, 1), d(4, 1)).unwrap(),
            test: Interval::new(d(4, 1), d(5, 1)).unwrap(),
            few_shot_days: 10,
        };
        let mut cfg = PipelineConfig::tiny_default(splits);
        cfg.nhits.n_epochs = 2;
        cfg.train_stride = 6;
        cfg.qra.samples = 8;
        cfg.qra.solver.n_epochs = 20;
        cfg.qra.design.use_pca = false;
        cfg
    }

    #[test]
    fn full_run_emits_monotone_quantiles() {
        let out = run(&frame("A", 1), &config()).unwrap();
        assert_eq!(out.test_quantiles.len(), out.test_ensembles.len());
        assert!(!out.test_quantiles.is_empty());
        assert!(out.test_quantiles.iter().all(QuantileForecast::is_monotone));
        assert_eq!(out.test_quantiles[0].levels.len(), 200);
        // Draws are back in price units.
        let mean = out.test_ensembles[0].samples.iter().flatten().sum::<f64>() / (8.0 * 24.0);
        assert!(mean > 20.0 && mean < 150.0, "{mean}");
    }

    #[test]
    fn few_shot_run_uses_target_test_origins() {
        let (target, d1, d2) = (frame("T", 1), frame("D1", 2), frame("D2", 3));
        let cfg = config();
        let out = run_xshot(&target, &[&d1, &d2], Strategy::FewShot, &cfg).unwrap();
        let full = build_splits(&cfg.splits, Strategy::Full, &target, &[]).unwrap();
        let origins: Vec<_> = out.test_quantiles.iter().map(|q| q.origin).collect();
        assert_eq!(origins, full.target.test.origins());
        assert!(run_xshot(&target, &[&target], Strategy::ZeroShot, &cfg).is_err());
    }

    #[test]
    fn validation_crps_covers_validation_origins() {
        let f = frame("A", 1);
        let cfg = config();
        let s = validation_crps(&f, &cfg).unwrap();
        let full = build_splits(&cfg.splits, Strategy::Full, &f, &[]).unwrap();
        assert_eq!(s.origins, full.target.validation.origins());
        assert!(s.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(s, validation_crps(&f, &cfg).unwrap());
    }
}
