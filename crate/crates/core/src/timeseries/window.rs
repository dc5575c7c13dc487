//! Rolling-origin sample windows and day-ahead information masking.

use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::features::FeatureKind;
use super::frame::FeatureFrame;
use crate::error::{Error, Result};

/// One week of hourly input.
pub const CONTEXT: usize = 168;
/// One day-ahead delivery day.
pub const HORIZON: usize = 24;
/// Input hours hidden for market-dependent covariates (10:00 to 24:00 on day X-1).
pub const MASK_HOURS: usize = 14;

/// One forecasting instance.
///
/// `origin` is the instant the input ends, i.e. the first target hour.
/// `future` holds the horizon rows; cells not known ahead of time are zero
/// and flagged in `known_mask`, whose first `context` rows cover the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub origin: DateTime<Utc>,
    pub inputs: Vec<Vec<f64>>,
    pub future: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub known_mask: Vec<Vec<bool>>,
    pub feature_names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
}

impl SampleWindow {
    pub fn context(&self) -> usize {
        self.inputs.len()
    }

    pub fn horizon(&self) -> usize {
        self.target.len()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Price history over the input rows.
    pub fn price_history(&self) -> Vec<f64> {
        self.inputs.iter().map(|r| r[0]).collect()
    }
}

/// Hides market-dependent covariates over the final [`MASK_HOURS`] input rows.
///
/// Calendar, price and proxy columns and the target are left as they are.
pub fn apply_mask(window: &SampleWindow, mask_value: f64) -> SampleWindow {
    let mut out = window.clone();
    mask_in_place(&mut out, mask_value);
    out
}

fn mask_in_place(w: &mut SampleWindow, mask_value: f64) {
    let ctx = w.context();
    let from = ctx.saturating_sub(MASK_HOURS);
    for (f, kind) in w.kinds.iter().enumerate() {
        if !kind.market_dependent() {
            continue;
        }
        for row in from..ctx {
            w.inputs[row][f] = mask_value;
            w.known_mask[row][f] = false;
        }
    }
}

/// Lazily materialised windows over a shared frame.
#[derive(Debug, Clone)]
pub struct WindowSet {
    frame: Arc<FeatureFrame>,
    starts: Vec<usize>,
    pub context: usize,
    pub horizon: usize,
    pub mask_value: Option<f64>,
    pub warnings: Vec<String>,
}

impl WindowSet {
    pub fn empty(frame: Arc<FeatureFrame>, context: usize, horizon: usize) -> Self {
        Self {
            frame,
            starts: Vec::new(),
            context,
            horizon,
            mask_value: None,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn frame(&self) -> &FeatureFrame {
        &self.frame
    }

    /// Marks every window for masking when materialised.
    pub fn masked(mut self, mask_value: f64) -> Self {
        self.mask_value = Some(mask_value);
        self
    }

    pub fn origin(&self, i: usize) -> DateTime<Utc> {
        self.frame.timestamps[self.starts[i] + self.context]
    }

    pub fn origins(&self) -> Vec<DateTime<Utc>> {
        (0..self.len()).map(|i| self.origin(i)).collect()
    }

    /// First covered hour and one past the last covered hour of window `i`.
    pub fn span(&self, i: usize) -> (DateTime<Utc>, DateTime<Utc>) {
        let s = self.starts[i];
        let last = self.frame.timestamps[s + self.context + self.horizon - 1];
        (self.frame.timestamps[s], last + chrono::Duration::hours(1))
    }

    pub fn get(&self, i: usize) -> SampleWindow {
        let f = &*self.frame;
        let s = self.starts[i];
        let width = f.width();
        let inputs = (s..s + self.context)
            .map(|r| f.columns.iter().map(|c| c[r]).collect())
            .collect();
        let future = (s + self.context..s + self.context + self.horizon)
            .map(|r| {
                f.columns
                    .iter()
                    .zip(&f.kinds)
                    .map(|(c, k)| if k.known_in_future() { c[r] } else { 0.0 })
                    .collect()
            })
            .collect();
        let target = f.columns[0][s + self.context..s + self.context + self.horizon].to_vec();
        let mut known_mask = vec![vec![true; width]; self.context];
        known_mask.extend(
            (0..self.horizon).map(|_| f.kinds.iter().map(|k| k.known_in_future()).collect::<Vec<_>>()),
        );
        let mut w = SampleWindow {
            origin: self.origin(i),
            inputs,
            future,
            target,
            known_mask,
            feature_names: f.names.clone(),
            kinds: f.kinds.clone(),
        };
        if let Some(v) = self.mask_value {
            mask_in_place(&mut w, v);
        }
        w
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleWindow> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn materialize(&self) -> Vec<SampleWindow> {
        self.iter().collect()
    }

    /// Keeps every `step`-th window.
    pub fn thin(mut self, step: usize) -> Self {
        let step = step.max(1);
        self.starts = self.starts.into_iter().step_by(step).collect();
        self
    }

    /// Keeps the final `n` windows.
    pub fn last(mut self, n: usize) -> Self {
        let k = self.starts.len().saturating_sub(n);
        self.starts.drain(..k);
        self
    }

    /// Pools window sets from several frames with identical columns.
    ///
    /// The pooled frame stacks the source frames, so its time axis is only
    /// ordered within each source; windows never straddle two sources.
    pub fn concat(sets: &[WindowSet]) -> Result<WindowSet> {
        let first = sets.first().ok_or(Error::Empty("window sets"))?;
        let (context, horizon, mask_value) = (first.context, first.horizon, first.mask_value);
        let mut zone = Vec::new();
        let mut timestamps = Vec::new();
        let mut columns = vec![Vec::new(); first.frame.width()];
        let mut starts = Vec::new();
        let mut warnings = Vec::new();
        for s in sets {
            if s.context != context || s.horizon != horizon || s.mask_value != mask_value {
                return Err(Error::domain("window sets differ in context, horizon or masking"));
            }
            if s.frame.names != first.frame.names || s.frame.kinds != first.frame.kinds {
                return Err(Error::Schema {
                    column: s.frame.zone.clone(),
                    message: "feature columns differ between pooled zones".into(),
                });
            }
            if !zone.contains(&s.frame.zone) {
                zone.push(s.frame.zone.clone());
            }
            let offset = timestamps.len();
            timestamps.extend_from_slice(&s.frame.timestamps);
            for (dst, src) in columns.iter_mut().zip(&s.frame.columns) {
                dst.extend_from_slice(src);
            }
            starts.extend(s.starts.iter().map(|k| k + offset));
            warnings.extend(s.warnings.iter().cloned());
        }
        let frame = FeatureFrame {
            zone: zone.join("+"),
            timestamps,
            names: first.frame.names.clone(),
            kinds: first.frame.kinds.clone(),
            columns,
        };
        Ok(WindowSet {
            frame: Arc::new(frame),
            starts,
            context,
            horizon,
            mask_value,
            warnings,
        })
    }
}

/// Number of windows a series of `len` hours yields.
pub fn window_count(len: usize, context: usize, horizon: usize, stride: usize) -> usize {
    if len < context + horizon || stride == 0 {
        0
    } else {
        (len - context - horizon) / stride + 1
    }
}

/// Rolling windows starting at row 0 and advancing by `stride` hours.
pub fn make_windows(frame: Arc<FeatureFrame>, context: usize, horizon: usize, stride: usize) -> Result<WindowSet> {
    if stride == 0 {
        return Err(Error::domain("stride must be at least 1"));
    }
    if context == 0 || horizon == 0 {
        return Err(Error::domain("context and horizon must be positive"));
    }
    let n = window_count(frame.len(), context, horizon, stride);
    let mut set = WindowSet::empty(frame, context, horizon);
    if n == 0 {
        set.warnings.push(format!(
            "{} hours cover fewer than context+horizon = {}; no windows emitted",
            set.frame.len(),
            context + horizon
        ));
        log::warn!("{}", set.warnings[0]);
    }
    set.starts = (0..n).map(|k| k * stride).collect();
    Ok(set)
}
