//! NHITS point forecaster with MC-dropout and SWAG ensembling.
//!
//! Each block average-pools the running input, appends the flattened past and
//! future covariates, and maps them through an MLP to backcast and forecast
//! coefficients that are linearly interpolated to full resolution. Blocks are
//! chained doubly-residually. Gradients are computed by a hand-written reverse pass.

pub mod checkpoint;
pub mod config;
pub mod ensemble;
pub mod model;
pub mod swag;
pub mod train;

pub use config::{NhitsConfig, PoolMode, SwagConfig, PRESETS};
pub use ensemble::{ensembles, mc_dropout_ensemble, mc_dropout_ensembles, swag_ensembles};
pub use model::{parameter_count, Batch, NhitsDims, NhitsModel};
pub use swag::SwagState;
pub use train::{evaluate_mae, learning_rate, predict_windows, train, TrainReport};
