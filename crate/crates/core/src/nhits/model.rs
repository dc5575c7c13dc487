use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{NhitsConfig, PoolMode};
use super::swag::SwagState;
use crate::error::{Error, Result};
use crate::timeseries::{FeatureKind, SampleWindow, Standardizer, WindowSet};

/// Input geometry a model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NhitsDims {
    pub context: usize,
    pub horizon: usize,
    /// Non-price columns fed over the context rows.
    pub past_covariates: usize,
    /// Columns known over the horizon rows.
    pub future_covariates: usize,
}

impl NhitsDims {
    pub fn from_kinds(kinds: &[FeatureKind], context: usize, horizon: usize) -> Self {
        Self {
            context,
            horizon,
            past_covariates: kinds.len().saturating_sub(1),
            future_covariates: kinds.iter().filter(|k| k.known_in_future()).count(),
        }
    }

    pub fn for_windows(ws: &WindowSet) -> Self {
        Self::from_kinds(&ws.frame().kinds, ws.context, ws.horizon)
    }

    pub fn covariate_len(&self) -> usize {
        self.context * self.past_covariates + self.horizon * self.future_covariates
    }
}

#[derive(Debug, Clone)]
struct Dense {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Dense {
    fn weights(&self) -> usize {
        self.rows * self.cols
    }

    fn bias(&self) -> usize {
        self.offset + self.weights()
    }

    fn end(&self) -> usize {
        self.bias() + self.rows
    }

    fn w<'a>(&self, p: &'a [f64]) -> DMatrixView<'a, f64> {
        DMatrixView::from_slice(&p[self.offset..self.bias()], self.rows, self.cols)
    }

    fn b<'a>(&self, p: &'a [f64]) -> DVectorView<'a, f64> {
        DVectorView::from_slice(&p[self.bias()..self.end()], self.rows)
    }
}

/// Output `i` = (1 − w)·θ[lo] + w·θ[hi].
#[derive(Debug, Clone)]
struct Interp {
    n: usize,
    taps: Vec<(usize, usize, f64)>,
}

impl Interp {
    /// Piecewise-linear map from `n` coefficients to `len` points, endpoints anchored.
    fn new(n: usize, len: usize) -> Self {
        let taps = (0..len)
            .map(|i| {
                if n == 1 || len == 1 {
                    return (0, 0, 0.0);
                }
                let pos = i as f64 * (n - 1) as f64 / (len - 1) as f64;
                let lo = (pos.floor() as usize).min(n - 1);
                let hi = (lo + 1).min(n - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect();
        Self { n, taps }
    }

    fn apply(&self, theta: &DMatrix<f64>, offset: usize) -> DMatrix<f64> {
        let b = theta.ncols();
        let mut out = DMatrix::zeros(self.taps.len(), b);
        for c in 0..b {
            let t = theta.column(c);
            let mut o = out.column_mut(c);
            for (i, (lo, hi, w)) in self.taps.iter().enumerate() {
                o[i] = (1.0 - w) * t[offset + lo] + w * t[offset + hi];
            }
        }
        out
    }

    /// Adds `scale · Jᵀ g` into rows `offset..offset+n` of `d_theta`.
    fn backward(&self, g: &DMatrix<f64>, d_theta: &mut DMatrix<f64>, offset: usize, scale: f64) {
        for c in 0..g.ncols() {
            let gc = g.column(c);
            let mut d = d_theta.column_mut(c);
            for (i, (lo, hi, w)) in self.taps.iter().enumerate() {
                d[offset + lo] += scale * (1.0 - w) * gc[i];
                d[offset + hi] += scale * w * gc[i];
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    kernel: usize,
    pooled: usize,
    layers: Vec<Dense>,
    back: Interp,
    fore: Interp,
}

/// Parameter layout and fixed operators of the whole network.
#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<Block>,
    n_params: usize,
}

fn build_layout(config: &NhitsConfig, dims: &NhitsDims) -> Layout {
    let cov = dims.covariate_len();
    let mut offset = 0;
    let mut blocks = Vec::new();
    for s in 0..config.stacks() {
        let kernel = config.n_pool_kernel_size[s];
        let r = config.n_freq_downsample[s];
        let pooled = dims.context.div_ceil(kernel);
        let n_back = dims.context.div_ceil(r);
        let n_fore = dims.horizon.div_ceil(r);
        for _ in 0..config.n_blocks[s] {
            let mut layers = Vec::new();
            let mut fan_in = pooled + cov;
            for &u in config.mlp_units[s].iter().chain(std::iter::once(&(n_back + n_fore))) {
                let d = Dense { offset, rows: u, cols: fan_in };
                offset = d.end();
                layers.push(d);
                fan_in = u;
            }
            blocks.push(Block {
                kernel,
                pooled,
                layers,
                back: Interp::new(n_back, dims.context),
                fore: Interp::new(n_fore, dims.horizon),
            });
        }
    }
    Layout { blocks, n_params: offset }
}

/// Column-per-example inputs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl Batch {
    pub fn from_windows(dims: &NhitsDims, windows: &[SampleWindow]) -> Result<Self> {
        let b = windows.len();
        let mut x = DMatrix::zeros(dims.context, b);
        let mut cov = DMatrix::zeros(dims.covariate_len(), b);
        let mut y = DMatrix::zeros(dims.horizon, b);
        for (c, w) in windows.iter().enumerate() {
            if w.context() != dims.context || w.horizon() != dims.horizon {
                return Err(Error::Shape {
                    expected: dims.context + dims.horizon,
                    actual: w.context() + w.horizon(),
                });
            }
            let known: Vec<usize> = (0..w.width()).filter(|j| w.kinds[*j].known_in_future()).collect();
            if w.width() != dims.past_covariates + 1 || known.len() != dims.future_covariates {
                return Err(Error::Shape {
                    expected: dims.past_covariates + 1,
                    actual: w.width(),
                });
            }
            let mut xc = x.column_mut(c);
            for (r, row) in w.inputs.iter().enumerate() {
                xc[r] = row[0];
            }
            let mut cc = cov.column_mut(c);
            let mut k = 0;
            for j in 1..w.width() {
                for row in &w.inputs {
                    cc[k] = row[j];
                    k += 1;
                }
            }
            for j in &known {
                for row in &w.future {
                    cc[k] = row[*j];
                    k += 1;
                }
            }
            y.column_mut(c).copy_from_slice(&w.target);
        }
        Ok(Self { x, cov, y })
    }

    pub fn from_set(dims: &NhitsDims, ws: &WindowSet, indices: &[usize]) -> Result<Self> {
        let windows: Vec<SampleWindow> = indices.iter().map(|i| ws.get(*i)).collect();
        Self::from_windows(dims, &windows)
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `n` copies of example `c`.
    pub fn repeat(&self, c: usize, n: usize) -> Self {
        let rep = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), n, |r, _| m[(r, c)]);
        Self {
            x: rep(&self.x),
            cov: rep(&self.cov),
            y: rep(&self.y),
        }
    }
}

struct HiddenCache {
    /// ReLU output before dropout.
    act: DMatrix<f64>,
    /// Inverted-dropout multipliers, absent in eval mode.
    mask: Option<DMatrix<f64>>,
}

impl HiddenCache {
    fn output(&self) -> DMatrix<f64> {
        match &self.mask {
            Some(m) => self.act.component_mul(m),
            None => self.act.clone(),
        }
    }
}

struct BlockCache {
    pooled: DMatrix<f64>,
    argmax: Option<Vec<usize>>,
    hidden: Vec<HiddenCache>,
}

pub struct ForwardCache {
    blocks: Vec<BlockCache>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epoch: usize,
    pub best_val_mae: Option<f64>,
}

/// NHITS point forecaster over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct NhitsModel {
    pub config: NhitsConfig,
    pub dims: NhitsDims,
    pub params: Vec<f64>,
    pub state: TrainState,
    pub swag: Option<SwagState>,
    /// Price-column standardizer the model was trained under.
    pub standardizer: Option<Standardizer>,
    pub feature_names: Vec<String>,
    layout: Layout,
}

impl PartialEq for NhitsModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.dims == other.dims
            && self.params == other.params
            && self.state == other.state
            && self.swag == other.swag
            && self.standardizer == other.standardizer
            && self.feature_names == other.feature_names
    }
}

/// Parameter count for a configuration without allocating the model.
pub fn parameter_count(config: &NhitsConfig, dims: &NhitsDims) -> usize {
    build_layout(config, dims).n_params
}

impl NhitsModel {
    /// Seeded uniform(±1/√fan_in) initialisation of weights and biases.
    pub fn new(config: NhitsConfig, dims: NhitsDims) -> Result<Self> {
        config.validate()?;
        if dims.context == 0 || dims.horizon == 0 {
            return Err(Error::domain("context and horizon must be positive"));
        }
        let layout = build_layout(&config, &dims);
        let mut params = vec![0.0; layout.n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for block in &layout.blocks {
            for d in &block.layers {
                let bound = 1.0 / (d.cols as f64).sqrt();
                for p in &mut params[d.offset..d.end()] {
                    *p = rng.gen_range(-bound..bound);
                }
            }
        }
        Ok(Self {
            config,
            dims,
            params,
            state: TrainState::default(),
            swag: None,
            standardizer: None,
            feature_names: Vec::new(),
            layout,
        })
    }

    /// Rebuilds a model around a stored parameter vector.
    pub fn from_parts(config: NhitsConfig, dims: NhitsDims, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(config, dims)?;
        if params.len() != m.params.len() {
            return Err(Error::Shape {
                expected: m.params.len(),
                actual: params.len(),
            });
        }
        m.params = params;
        Ok(m)
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.blocks.len()
    }

    /// Zeroes the forecast rows of block `b`'s output layer.
    pub fn zero_forecast_branch(&mut self, b: usize) {
        let block = &self.layout.blocks[b];
        let out = block.layers.last().expect("block has an output layer");
        let n_back = block.back.n;
        let p = &mut self.params;
        let mut w = DMatrixViewMut::from_slice(&mut p[out.offset..out.bias()], out.rows, out.cols);
        for r in n_back..out.rows {
            w.row_mut(r).fill(0.0);
        }
        p[out.bias() + n_back..out.end()].fill(0.0);
    }

    /// Zeroes the backcast rows of block `b`'s output layer.
    pub fn zero_backcast_branch(&mut self, b: usize) {
        let block = &self.layout.blocks[b];
        let out = block.layers.last().expect("block has an output layer");
        let n_back = block.back.n;
        let p = &mut self.params;
        let mut w = DMatrixViewMut::from_slice(&mut p[out.offset..out.bias()], out.rows, out.cols);
        for r in 0..n_back {
            w.row_mut(r).fill(0.0);
        }
        p[out.bias()..out.bias() + n_back].fill(0.0);
    }

    /// Deterministic point forecast for one window.
    pub fn forward(&self, window: &SampleWindow) -> Result<Vec<f64>> {
        let batch = Batch::from_windows(&self.dims, std::slice::from_ref(window))?;
        let (f, _) = self.forward_batch(&self.params, &batch, None)?;
        Ok(f.column(0).iter().copied().collect())
    }

    /// Forecasts as columns; dropout is active when `rng` is given.
    pub fn forward_batch(
        &self,
        params: &[f64],
        batch: &Batch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(DMatrix<f64>, ForwardCache)> {
        let n = batch.len();
        let p_drop = self.config.dropout_prob_theta;
        let keep_scale = 1.0 / (1.0 - p_drop);
        let mut resid = batch.x.clone();
        let mut acc = DMatrix::zeros(self.dims.horizon, n);
        let mut caches = Vec::with_capacity(self.layout.blocks.len());
        for (bi, block) in self.layout.blocks.iter().enumerate() {
            let (pooled, argmax) = pool(&resid, block.kernel, block.pooled, self.config.pool_mode);
            let first = &block.layers[0];
            let w = first.w(params);
            let w_pool = w.columns(0, block.pooled);
            let w_cov = w.columns(block.pooled, first.cols - block.pooled);
            let mut z = w_pool * &pooled;
            if batch.cov.nrows() > 0 {
                z.gemm(1.0, &w_cov, &batch.cov, 1.0);
            }
            let mut hidden = Vec::with_capacity(block.layers.len() - 1);
            let last = block.layers.len() - 1;
            for (li, layer) in block.layers.iter().enumerate() {
                if li > 0 {
                    let h_prev = hidden.last().map(HiddenCache::output).expect("previous hidden layer");
                    z = layer.w(params) * &h_prev;
                }
                let b = layer.b(params);
                for mut col in z.column_iter_mut() {
                    col += &b;
                }
                if li == last {
                    break;
                }
                z.apply(|v| *v = v.max(0.0));
                let mask = match rng.as_deref_mut() {
                    Some(r) if p_drop > 0.0 => Some(DMatrix::from_fn(z.nrows(), n, |_, _| {
                        if r.gen::<f64>() < p_drop {
                            0.0
                        } else {
                            keep_scale
                        }
                    })),
                    _ => None,
                };
                hidden.push(HiddenCache { act: z.clone(), mask });
            }
            let theta = z;
            let back = block.back.apply(&theta, 0);
            let fore = block.fore.apply(&theta, block.back.n);
            resid -= back;
            acc += fore;
            if acc.iter().any(|v| !v.is_finite()) || resid.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { block: bi });
            }
            caches.push(BlockCache { pooled, argmax, hidden });
        }
        Ok((acc, ForwardCache { blocks: caches }))
    }

    /// Gradient of Σ d_out ⊙ forecast with respect to `params`, added into `grad`.
    pub fn backward(&self, params: &[f64], batch: &Batch, cache: &ForwardCache, d_out: &DMatrix<f64>, grad: &mut [f64]) {
        let n = batch.len();
        let mut g_x = DMatrix::<f64>::zeros(self.dims.context, n);
        for (block, bc) in self.layout.blocks.iter().zip(&cache.blocks).rev() {
            let out = block.layers.last().expect("output layer");
            let mut d = DMatrix::zeros(out.rows, n);
            block.back.backward(&g_x, &mut d, 0, -1.0);
            block.fore.backward(d_out, &mut d, block.back.n, 1.0);
            for li in (0..block.layers.len()).rev() {
                let layer = &block.layers[li];
                if li < block.layers.len() - 1 {
                    let hc = &bc.hidden[li];
                    if let Some(m) = &hc.mask {
                        d.component_mul_assign(m);
                    }
                    d.zip_apply(&hc.act, |g, a| {
                        if a <= 0.0 {
                            *g = 0.0
                        }
                    });
                }
                let (gw_all, gb_all) = grad[layer.offset..layer.end()].split_at_mut(layer.weights());
                for (gb, s) in gb_all.iter_mut().zip(d.column_sum().iter()) {
                    *gb += s;
                }
                let mut gw = DMatrixViewMut::from_slice(gw_all, layer.rows, layer.cols);
                if li > 0 {
                    let h_prev = bc.hidden[li - 1].output();
                    gw.gemm(1.0, &d, &h_prev.transpose(), 1.0);
                    d = layer.w(params).tr_mul(&d);
                } else {
                    let k = block.pooled;
                    gw.columns_mut(0, k).gemm(1.0, &d, &bc.pooled.transpose(), 1.0);
                    if batch.cov.nrows() > 0 {
                        gw.columns_mut(k, layer.cols - k).gemm(1.0, &d, &batch.cov.transpose(), 1.0);
                    }
                    let d_pooled = layer.w(params).columns(0, k).tr_mul(&d);
                    unpool_add(&d_pooled, block.kernel, self.dims.context, bc.argmax.as_deref(), &mut g_x);
                }
            }
        }
    }
}

/// Ceil-mode pooling with stride equal to the kernel.
fn pool(x: &DMatrix<f64>, k: usize, out_len: usize, mode: PoolMode) -> (DMatrix<f64>, Option<Vec<usize>>) {
    let (len, n) = x.shape();
    let mut out = DMatrix::zeros(out_len, n);
    let mut argmax = (mode == PoolMode::Max).then(|| vec![0; out_len * n]);
    for c in 0..n {
        let col = x.column(c);
        for j in 0..out_len {
            let lo = j * k;
            let hi = ((j + 1) * k).min(len);
            match mode {
                PoolMode::Average => {
                    out[(j, c)] = col.rows(lo, hi - lo).sum() / (hi - lo) as f64;
                }
                PoolMode::Max => {
                    let mut best = lo;
                    for i in lo + 1..hi {
                        if col[i] > col[best] {
                            best = i;
                        }
                    }
                    out[(j, c)] = col[best];
                    if let Some(a) = argmax.as_mut() {
                        a[c * out_len + j] = best;
                    }
                }
            }
        }
    }
    (out, argmax)
}

fn unpool_add(d: &DMatrix<f64>, k: usize, len: usize, argmax: Option<&[usize]>, g: &mut DMatrix<f64>) {
    let (out_len, n) = d.shape();
    for c in 0..n {
        for j in 0..out_len {
            let v = d[(j, c)];
            match argmax {
                Some(a) => g[(a[c * out_len + j], c)] += v,
                None => {
                    let lo = j * k;
                    let hi = ((j + 1) * k).min(len);
                    let share = v / (hi - lo) as f64;
                    for i in lo..hi {
                        g[(i, c)] += share;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::window::CONTEXT;
    use crate::timeseries::HORIZON;

    fn toy_config(stacks: &[(usize, usize, Vec<usize>)]) -> NhitsConfig {
        let mut c = NhitsConfig::tiny_default();
        c.n_blocks = vec![1; stacks.len()];
        c.n_pool_kernel_size = stacks.iter().map(|s| s.0).collect();
        c.n_freq_downsample = stacks.iter().map(|s| s.1).collect();
        c.mlp_units = stacks.iter().map(|s| s.2.clone()).collect();
        c.dropout_prob_theta = 0.0;
        c
    }

    fn toy_batch(dims: &NhitsDims, n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            x: DMatrix::from_fn(dims.context, n, |_, _| rng.gen_range(-1.0..1.0)),
            cov: DMatrix::from_fn(dims.covariate_len(), n, |_, _| rng.gen_range(-1.0..1.0)),
            y: DMatrix::from_fn(dims.horizon, n, |_, _| rng.gen_range(-1.0..1.0)),
        }
    }

    fn calendar_dims() -> NhitsDims {
        NhitsDims { context: CONTEXT, horizon: HORIZON, past_covariates: 8, future_covariates: 8 }
    }

    #[test]
    fn parameter_counts() {
        let dims = calendar_dims();
        let tuned = parameter_count(&NhitsConfig::tiny_tuned(), &dims);
        assert_eq!(tuned, 112_192);
        assert!((tuned as f64 - 115_300.0).abs() / 115_300.0 < 0.05);
        assert_eq!(parameter_count(&NhitsConfig::tiny_default(), &dims), 108_384);
    }

    #[test]
    fn interpolation_anchors_endpoints() {
        let ip = Interp::new(2, 4);
        let theta = DMatrix::from_column_slice(2, 1, &[1.0, 4.0]);
        let out = ip.apply(&theta, 0);
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let id = Interp::new(5, 5);
        let t = DMatrix::from_column_slice(5, 1, &[3.0, -1.0, 2.0, 7.0, 0.5]);
        assert_eq!(id.apply(&t, 0), t);
        assert_eq!(Interp::new(1, 3).apply(&DMatrix::from_element(1, 1, 2.5), 0).as_slice(), &[2.5; 3]);
    }

    #[test]
    fn zero_weights_forecast_zero() {
        let dims = calendar_dims();
        let mut m = NhitsModel::new(NhitsConfig::tiny_default(), dims).unwrap();
        m.params.fill(0.0);
        let b = toy_batch(&dims, 3, 1);
        let (f, _) = m.forward_batch(&m.params, &b, None).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_computed_single_block() {
        // context 4 pooled by 2, horizon 4 with downsample 2: two coefficients each.
        let dims = NhitsDims { context: 4, horizon: 4, past_covariates: 0, future_covariates: 0 };
        let mut m = NhitsModel::new(toy_config(&[(2, 2, vec![2])]), dims).unwrap();
        assert_eq!(m.n_params(), 2 * 2 + 2 + 4 * 2 + 4);
        // Hidden layer: identity on the pooled input, zero bias.
        let mut p = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        // Output layer (column-major 4x2): backcast rows zero, forecast θ = [h0, 2·h1] + [0, 1].
        p.extend_from_slice(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        p.extend_from_slice(&[0.0, 0.0, 0.0, 1.0]);
        m.params = p;
        let batch = Batch {
            x: DMatrix::from_column_slice(4, 1, &[1.0, 3.0, 5.0, 7.0]),
            cov: DMatrix::zeros(0, 1),
            y: DMatrix::zeros(4, 1),
        };
        let (f, _) = m.forward_batch(&m.params, &batch, None).unwrap();
        // pooled = [2, 6]; θ_fore = [2, 13]; linear over 4 points.
        let expected = [2.0, 2.0 + 11.0 / 3.0, 2.0 + 22.0 / 3.0, 13.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn grad_check(mode: PoolMode) -> (usize, f64) {
        let dims = NhitsDims { context: 8, horizon: 4, past_covariates: 1, future_covariates: 1 };
        let mut config = toy_config(&[(2, 2, vec![4, 3]), (1, 1, vec![3])]);
        config.pool_mode = mode;
        let m = NhitsModel::new(config, dims).unwrap();
        let b = toy_batch(&dims, 5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let c = DMatrix::from_fn(dims.horizon, 5, |_, _| rng.gen_range(-1.0..1.0));
        let loss = |p: &[f64]| m.forward_batch(p, &b, None).unwrap().0.component_mul(&c).sum();
        let (_, cache) = m.forward_batch(&m.params, &b, None).unwrap();
        let mut g = vec![0.0; m.n_params()];
        m.backward(&m.params, &b, &cache, &c, &mut g);
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..m.n_params() {
            let mut p = m.params.clone();
            p[i] += eps;
            let up = loss(&p);
            p[i] -= 2.0 * eps;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * eps);
            let denom = g[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((g[i] - fd).abs() / denom);
        }
        (m.n_params(), worst)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for mode in [PoolMode::Average, PoolMode::Max] {
            let (n, err) = grad_check(mode);
            assert!(n <= 300, "{n} parameters");
            assert!(err < 1e-4, "{mode:?}: {err}");
        }
    }

    #[test]
    fn zeroed_forecast_branches_give_zero() {
        let dims = calendar_dims();
        let mut m = NhitsModel::new(NhitsConfig::tiny_default(), dims).unwrap();
        for b in 0..m.n_blocks() {
            m.zero_forecast_branch(b);
        }
        let (f, _) = m.forward_batch(&m.params, &toy_batch(&dims, 2, 3), None).unwrap();
        assert!(f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn appended_zero_block_changes_nothing() {
        let dims = NhitsDims { context: 16, horizon: 4, past_covariates: 1, future_covariates: 0 };
        let one = toy_config(&[(2, 2, vec![6])]);
        let mut m1 = NhitsModel::new(one.clone(), dims).unwrap();
        m1.zero_backcast_branch(0);
        let mut two = one.clone();
        two.n_blocks = vec![2];
        let mut m2 = NhitsModel::new(two, dims).unwrap();
        let n1 = m1.n_params();
        m2.params[..n1].copy_from_slice(&m1.params);
        m2.params[n1..].fill(0.0);
        let b = toy_batch(&dims, 3, 4);
        let f1 = m1.forward_batch(&m1.params, &b, None).unwrap().0;
        let f2 = m2.forward_batch(&m2.params, &b, None).unwrap().0;
        assert_eq!(f1, f2);
    }

    #[test]
    fn eval_forward_is_deterministic_and_dropout_is_seeded() {
        let dims = calendar_dims();
        let m = NhitsModel::new(NhitsConfig::tiny_default(), dims).unwrap();
        let b = toy_batch(&dims, 4, 5);
        assert_eq!(m.forward_batch(&m.params, &b, None).unwrap().0, m.forward_batch(&m.params, &b, None).unwrap().0);
        let run = |s| m.forward_batch(&m.params, &b, Some(&mut ChaCha8Rng::seed_from_u64(s))).unwrap().0;
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn non_finite_input_reports_block() {
        let dims = NhitsDims { context: 8, horizon: 4, past_covariates: 0, future_covariates: 0 };
        let m = NhitsModel::new(toy_config(&[(1, 1, vec![4])]), dims).unwrap();
        let mut b = toy_batch(&dims, 1, 1);
        b.x[(0, 0)] = f64::INFINITY;
        assert!(matches!(m.forward_batch(&m.params, &b, None), Err(Error::NonFinite { block: 0 })));
    }
}
