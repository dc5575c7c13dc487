//! Proper scoring rules and calibration diagnostics.
//!
//! CRPS uses the all-pairs ensemble estimator. Aggregate CRPS is the mean over
//! origins and horizons, in price units.

pub mod report;
pub mod rules;

pub use report::{ScoreRow, ScoreSeries, ScoreSummary, ScoreTable};
pub use rules::{crps_ensemble, crps_quantile, default_ece_levels, ece, energy_score, ks_uniform, pinball, pit_ensemble, pit_quantile};
