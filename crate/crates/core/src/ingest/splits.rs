//! Train/validation/test partitioning and the zero/one/few-shot increments.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::window::window_count;
use crate::timeseries::{make_windows, FeatureFrame, Interval, WindowSet, CONTEXT, HORIZON};

/// Training windows overlap hour by hour; evaluation windows are whole days.
pub const TRAIN_STRIDE: usize = 1;
pub const EVAL_STRIDE: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Interval,
    pub validation: Interval,
    pub test: Interval,
    /// Length of the few-shot increment, taken from the end of `validation`.
    #[serde(default = "default_few_shot_days")]
    pub few_shot_days: u32,
}

fn default_few_shot_days() -> u32 {
    30
}

impl Default for DatasetSplits {
    fn default() -> Self {
        let d = |y, m, day| Utc.with_ymd_and_hms(y, m, day, 0, 0, 0).unwrap();
        Self {
            train: Interval {
                start: d(2018, 10, 1),
                end: d(2023, 1, 1),
            },
            validation: Interval {
                start: d(2023, 1, 1),
                end: d(2024, 1, 1),
            },
            test: Interval {
                start: d(2024, 1, 1),
                end: d(2025, 1, 1),
            },
            few_shot_days: default_few_shot_days(),
        }
    }
}

impl DatasetSplits {
    pub fn validate(&self) -> Result<()> {
        for (name, iv) in [("train", self.train), ("validation", self.validation), ("test", self.test)] {
            if iv.is_empty() {
                return Err(Error::domain(format!("{name} interval is empty")));
            }
        }
        if self.train.end > self.validation.start || self.validation.end > self.test.start {
            return Err(Error::domain("splits must be disjoint and ordered train < validation < test"));
        }
        Ok(())
    }

    /// Target-zone data admitted for training under `strategy`.
    pub fn increment(&self, strategy: Strategy) -> Increment {
        match strategy {
            Strategy::Full | Strategy::ZeroShot => Increment::None,
            Strategy::OneShot => Increment::OneWindow,
            Strategy::FewShot => Increment::FewShotDays(self.few_shot_days),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Full,
    ZeroShot,
    OneShot,
    FewShot,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Strategy::Full),
            "zero-shot" => Ok(Strategy::ZeroShot),
            "one-shot" => Ok(Strategy::OneShot),
            "few-shot" => Ok(Strategy::FewShot),
            _ => Err(Error::domain(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Increment {
    None,
    OneWindow,
    FewShotDays(u32),
}

#[derive(Debug, Clone)]
pub struct ZoneWindows {
    pub train: WindowSet,
    pub validation: WindowSet,
    pub test: WindowSet,
}

#[derive(Debug, Clone)]
pub struct SplitWindows {
    pub strategy: Strategy,
    pub target: ZoneWindows,
    pub donors: BTreeMap<String, ZoneWindows>,
}

impl SplitWindows {
    /// Every evaluation window must lie outside `train`.
    pub fn check_leakage(&self, train: Interval) -> Result<()> {
        let zones = std::iter::once(&self.target).chain(self.donors.values());
        for z in zones {
            for set in [&z.validation, &z.test] {
                for i in 0..set.len() {
                    let (s, e) = set.span(i);
                    if s < train.end && e > train.start {
                        return Err(Error::domain(format!(
                            "window at origin {} overlaps training interval",
                            set.origin(i)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn require(frame: &FeatureFrame, iv: Interval) -> Result<()> {
    let missing = iv.hourly().find(|t| frame.timestamps.binary_search(t).is_err());
    match missing {
        None => Ok(()),
        Some(start) => {
            let end = iv
                .hourly()
                .skip_while(|t| *t < start)
                .find(|t| frame.timestamps.binary_search(t).is_ok())
                .unwrap_or(iv.end);
            Err(Error::Coverage { start, end })
        }
    }
}

fn windows(frame: &FeatureFrame, iv: Interval, stride: usize) -> Result<WindowSet> {
    make_windows(Arc::new(frame.slice(iv)), CONTEXT, HORIZON, stride)
}

fn empty_like(frame: &FeatureFrame) -> WindowSet {
    WindowSet::empty(Arc::new(frame.slice(Interval {
        start: frame.timestamps[0],
        end: frame.timestamps[0],
    })), CONTEXT, HORIZON)
}

/// Builds per-zone window sets. Frames are used as given (standardize first).
///
/// Donor zones train on `train` and validate on `validation`. Under the x-shot
/// strategies the target zone contributes only test windows plus the
/// increment, which is cut from the end of `validation`.
pub fn build_splits(
    spec: &DatasetSplits,
    strategy: Strategy,
    target: &FeatureFrame,
    donors: &[&FeatureFrame],
) -> Result<SplitWindows> {
    spec.validate()?;
    if target.is_empty() {
        return Err(Error::Empty("target frame"));
    }
    let target_windows = match strategy {
        Strategy::Full => {
            require(target, spec.train)?;
            require(target, spec.validation)?;
            require(target, spec.test)?;
            ZoneWindows {
                train: windows(target, spec.train, TRAIN_STRIDE)?,
                validation: windows(target, spec.validation, EVAL_STRIDE)?,
                test: windows(target, spec.test, EVAL_STRIDE)?,
            }
        }
        Strategy::ZeroShot | Strategy::OneShot | Strategy::FewShot => {
            require(target, spec.test)?;
            let train = match spec.increment(strategy) {
                Increment::None => empty_like(target),
                Increment::OneWindow => {
                    let iv = Interval {
                        start: spec.validation.end - Duration::hours((CONTEXT + HORIZON) as i64),
                        end: spec.validation.end,
                    };
                    require(target, iv)?;
                    windows(target, iv, EVAL_STRIDE)?
                }
                Increment::FewShotDays(days) => {
                    let iv = Interval {
                        start: spec.validation.end - Duration::days(i64::from(days)),
                        end: spec.validation.end,
                    };
                    require(target, iv)?;
                    windows(target, iv, EVAL_STRIDE)?
                }
            };
            ZoneWindows {
                train,
                validation: empty_like(target),
                test: windows(target, spec.test, EVAL_STRIDE)?,
            }
        }
    };

    let mut donor_windows = BTreeMap::new();
    if strategy != Strategy::Full {
        if donors.is_empty() {
            return Err(Error::domain("x-shot strategies need at least one donor zone"));
        }
        for d in donors {
            if d.zone == target.zone {
                continue;
            }
            require(d, spec.train)?;
            require(d, spec.validation)?;
            donor_windows.insert(
                d.zone.clone(),
                ZoneWindows {
                    train: windows(d, spec.train, TRAIN_STRIDE)?,
                    validation: windows(d, spec.validation, EVAL_STRIDE)?,
                    test: empty_like(d),
                },
            );
        }
    }
    Ok(SplitWindows {
        strategy,
        target: target_windows,
        donors: donor_windows,
    })
}

/// Expected few-shot window count for a given number of days.
pub fn few_shot_window_count(days: u32) -> usize {
    window_count(days as usize * 24, CONTEXT, HORIZON, EVAL_STRIDE)
}
