//! Dual-path recurrent separator with real-FFT feature conversion.
//!
//! Layers alternate between the time domain and the domain obtained by a
//! real DFT along time. Odd layers (1, 3, …) see `[B, F_r, T, C]` and are
//! followed by [`time_rfft_convert`]; even layers see
//! `[B, F_r, T/2+1, 2C]` and are followed by [`time_irfft_convert`].

use crate::error::{Error, Result};
use crate::numerics::ops::{LstmVars, GROUP_NORM_EPS};
use crate::numerics::{Graph, ParamId, ParamStore, Var};
use crate::rng::RngState;

use super::config::{DualPathConfig, ModelConfig, PassOrder};

const FREQ_AXIS: usize = 1;
const TIME_AXIS: usize = 2;

/// Residual recurrent unit: norm → BiLSTM → linear 2h→C → + input.
#[derive(Debug, Clone)]
pub struct RecurrentPassParams {
    pub features: usize,
    pub hidden: usize,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
    pub w_ih: [ParamId; 2],
    pub w_hh: [ParamId; 2],
    pub bias: [ParamId; 2],
    pub proj_w: ParamId,
    pub proj_b: ParamId,
}

impl RecurrentPassParams {
    pub fn init(store: &mut ParamStore, prefix: &str, features: usize, hidden: usize, rng: &mut RngState) -> Self {
        let g4 = 4 * hidden;
        let dirs = ["fwd", "bwd"];
        let w_ih = dirs.map(|d| store.weight(format!("{prefix}.lstm.{d}.w_ih"), &[features, g4], features, rng));
        let w_hh = dirs.map(|d| store.weight(format!("{prefix}.lstm.{d}.w_hh"), &[hidden, g4], hidden, rng));
        let bias = dirs.map(|d| store.zeros(format!("{prefix}.lstm.{d}.bias"), &[g4]));
        Self {
            features,
            hidden,
            norm_gamma: store.ones(format!("{prefix}.norm.gamma"), &[features]),
            norm_beta: store.zeros(format!("{prefix}.norm.beta"), &[features]),
            w_ih,
            w_hh,
            bias,
            proj_w: store.weight(format!("{prefix}.proj.weight"), &[2 * hidden, features], 2 * hidden, rng),
            proj_b: store.zeros(format!("{prefix}.proj.bias"), &[features]),
        }
    }

    pub fn count(features: usize, hidden: usize) -> usize {
        let lstm = 2 * (4 * hidden * (features + hidden) + 4 * hidden);
        2 * features + lstm + 2 * hidden * features + features
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, axis: usize, groups: usize) -> Result<Var> {
        let gamma = g.param(store, self.norm_gamma);
        let beta = g.param(store, self.norm_beta);
        let h = g.group_norm(x, groups, gamma, beta, GROUP_NORM_EPS)?;
        let lstm = LstmVars {
            w_ih: self.w_ih.map(|p| g.param(store, p)),
            w_hh: self.w_hh.map(|p| g.param(store, p)),
            bias: self.bias.map(|p| g.param(store, p)),
        };
        let h = g.bilstm(h, axis, &lstm, self.hidden)?;
        let w = g.param(store, self.proj_w);
        let h = g.linear(h, w)?;
        let b = g.param(store, self.proj_b);
        let h = g.add_bias(h, b)?;
        g.add(x, h)
    }
}

/// One dual-path layer: a pass along the sequence axis and one along frequency.
#[derive(Debug, Clone)]
pub struct DualPathLayerParams {
    pub time: RecurrentPassParams,
    pub freq: RecurrentPassParams,
}

impl DualPathLayerParams {
    pub fn init(store: &mut ParamStore, prefix: &str, features: usize, hidden: usize, rng: &mut RngState) -> Self {
        Self {
            time: RecurrentPassParams::init(store, &format!("{prefix}.time"), features, hidden, rng),
            freq: RecurrentPassParams::init(store, &format!("{prefix}.freq"), features, hidden, rng),
        }
    }

    pub fn count(features: usize, hidden: usize) -> usize {
        2 * RecurrentPassParams::count(features, hidden)
    }
}

pub fn dual_path_layer_forward(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    p: &DualPathLayerParams,
    groups: usize,
    order: PassOrder,
) -> Result<Var> {
    match g.shape(x) {
        [_, _, _, c] if *c == p.time.features => {}
        s => return Err(Error::shape("dual_path_layer", format!("input {s:?} for {} features", p.time.features))),
    }
    match order {
        PassOrder::TimeFirst => {
            let x = p.time.forward(g, store, x, TIME_AXIS, groups)?;
            p.freq.forward(g, store, x, FREQ_AXIS, groups)
        }
        PassOrder::FrequencyFirst => {
            let x = p.freq.forward(g, store, x, FREQ_AXIS, groups)?;
            p.time.forward(g, store, x, TIME_AXIS, groups)
        }
    }
}

/// `[B, F_r, T, C]` → `[B, F_r, T/2+1, 2C]`; real parts in features `[0, C)`,
/// imaginary parts in `[C, 2C)`.
pub fn time_rfft_convert(g: &mut Graph, y: Var) -> Result<Var> {
    if g.shape(y).len() != 4 {
        return Err(Error::shape("time_rfft_convert", format!("expected rank 4, got {:?}", g.shape(y))));
    }
    g.rfft_features(y, TIME_AXIS)
}

/// Inverse of [`time_rfft_convert`] back to `t` frames.
pub fn time_irfft_convert(g: &mut Graph, x: Var, t: usize) -> Result<Var> {
    if g.shape(x).len() != 4 {
        return Err(Error::shape("time_irfft_convert", format!("expected rank 4, got {:?}", g.shape(x))));
    }
    g.irfft_features(x, TIME_AXIS, t)
}

#[derive(Debug, Clone)]
pub struct Separator {
    pub layers: Vec<DualPathLayerParams>,
    pub groups: usize,
    pub order: PassOrder,
}

impl Separator {
    pub fn init(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut RngState) -> Self {
        let c = cfg.latent_channels();
        let layers = (0..cfg.dual_path.layers)
            .map(|i| {
                let (features, hidden) = layer_dims(&cfg.dual_path, c, i);
                DualPathLayerParams::init(store, &format!("separator.layer{i}"), features, hidden, rng)
            })
            .collect();
        Self { layers, groups: cfg.norm_groups, order: cfg.dual_path.order }
    }

    pub fn count(cfg: &ModelConfig) -> usize {
        let c = cfg.latent_channels();
        (0..cfg.dual_path.layers)
            .map(|i| {
                let (f, h) = layer_dims(&cfg.dual_path, c, i);
                DualPathLayerParams::count(f, h)
            })
            .sum()
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, latent: Var) -> Result<Var> {
        let t = match g.shape(latent) {
            [_, _, t, _] if *t >= 2 => *t,
            s => return Err(Error::dim("separator", format!("need [B, F, T>=2, C], got {s:?}"))),
        };
        let mut x = latent;
        for (i, layer) in self.layers.iter().enumerate() {
            x = dual_path_layer_forward(g, store, x, layer, self.groups, self.order)?;
            x = if i % 2 == 0 { time_rfft_convert(g, x)? } else { time_irfft_convert(g, x, t)? };
        }
        Ok(x)
    }
}

/// `(features, hidden)` of zero-based layer `i`.
fn layer_dims(dp: &DualPathConfig, c: usize, i: usize) -> (usize, usize) {
    if i.is_multiple_of(2) {
        (c, dp.hidden_odd)
    } else {
        (2 * c, dp.hidden_even)
    }
}
