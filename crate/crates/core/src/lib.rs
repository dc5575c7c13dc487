//! Probabilistic day-ahead electricity price forecasting.
//!
//! The crate covers the full path from hourly market data to scored
//! probabilistic forecasts: feature engineering and windowing
//! ([`timeseries`]), data acquisition ([`ingest`]), empirical baselines
//! ([`baselines`]), an NHITS point forecaster with MC-dropout and SWAG
//! ensembles ([`nhits`]), a quantile-regression-averaging head ([`qra`]),
//! proper scoring rules ([`scoring`]) and Diebold–Mariano based model
//! comparison and feature selection ([`stats`]).
//!
//! [`pipeline`] wires the backbone and QRA together for full and x-shot
//! runs, [`config`] holds the experiment document, [`report`] draws fan
//! charts and score tables, [`carbon`] converts run time and power into
//! emissions, and [`synthetic`] generates seeded test markets.

pub mod baselines;
pub mod carbon;
pub mod config;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod nhits;
pub mod pipeline;
pub mod qra;
pub mod report;
pub mod scoring;
pub mod stats;
pub mod synthetic;
pub mod timeseries;

pub use error::{Error, Result};
