//! Time axis, calendar and market features, standardization and windowing.

pub mod calendar;
pub mod features;
pub mod frame;
pub mod series;
pub mod standardize;
pub mod window;

pub use calendar::{build_calendar_features, cyclical_encode, CALENDAR_FEATURES};
pub use features::{synthetic_price, FeatureGroup, FeatureKind, FeatureSpec, Representation};
pub use frame::FeatureFrame;
pub use series::{HourlySeries, Interval};
pub use standardize::Standardizer;
pub use window::{apply_mask, make_windows, SampleWindow, WindowSet, CONTEXT, HORIZON, MASK_HOURS};
