//! Quantile regression averaging over backbone ensembles.
//!
//! One pinball-loss LASSO per (horizon, level), isotonic repair across levels,
//! then linear interpolation onto a dense uniform level grid.

pub mod design;
pub mod isotonic;
pub mod model;
pub mod solver;

pub use design::{build_design, DesignOptions, HorizonDesign, Pca, QraDesign};
pub use isotonic::{interpolate_level, interpolate_quantiles, isotonic_repair, uniform_levels};
pub use model::{repair, split_rows, QraConfig, QraModel, QuantileFit};
pub use solver::{empirical_quantile, fit_pinball_lasso, LassoFit, Problem, SolverConfig};
