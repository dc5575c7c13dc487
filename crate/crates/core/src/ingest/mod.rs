//! Data acquisition, local persistence and dataset splits.

pub mod client;
pub mod config;
pub mod csvio;
pub mod dataset;
pub mod splits;

pub use client::{parse_price_payload, ClientOptions, PriceClient};
pub use config::ZoneConfig;
pub use dataset::{load_zone_frame, synthetic_price_series};
pub use csvio::{load_csv, load_frame_csv, save_csv, save_frame_csv};
pub use splits::{build_splits, DatasetSplits, Increment, SplitWindows, Strategy, ZoneWindows};
