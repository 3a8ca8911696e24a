//! Sparse down-sampling encoder.
//!
//! Each block runs band-local convolution modules on the low, mid and high
//! slices of the frequency axis, keeps the result as the skip tensor, then
//! compresses each band with a non-overlapping strided convolution
//! (kernel = stride) and a GELU. All tensors are `[B, F, T, C]`.

use crate::bandplan::{BandPlan, BAND_NAMES};
use crate::error::{Error, Result};
use crate::numerics::ops::GROUP_NORM_EPS;
use crate::numerics::{Graph, ParamId, ParamStore, Var};
use crate::rng::RngState;

use super::config::ModelConfig;

const FREQ_AXIS: usize = 1;

/// Conformer-style residual convolution module:
/// norm → conv k3 (C→C/4) → GELU → conv k3 → GELU → conv k1 (C/4→C) → + input.
#[derive(Debug, Clone)]
pub struct ConvModuleParams {
    pub channels: usize,
    pub norm_gamma: ParamId,
    pub norm_beta: ParamId,
    pub convs: [(ParamId, ParamId); 3],
}

pub const CONV_MODULE_KERNELS: [usize; 3] = [3, 3, 1];

impl ConvModuleParams {
    pub fn init(store: &mut ParamStore, prefix: &str, c: usize, rng: &mut RngState) -> Self {
        let h = c / 4;
        let dims = [(c, h), (h, h), (h, c)];
        let convs = std::array::from_fn(|i| {
            let (ci, co) = dims[i];
            let k = CONV_MODULE_KERNELS[i];
            let w = store.weight(format!("{prefix}.conv{i}.weight"), &[k, ci, co], k * ci, rng);
            let b = store.zeros(format!("{prefix}.conv{i}.bias"), &[co]);
            (w, b)
        });
        Self {
            channels: c,
            norm_gamma: store.ones(format!("{prefix}.norm.gamma"), &[c]),
            norm_beta: store.zeros(format!("{prefix}.norm.beta"), &[c]),
            convs,
        }
    }

    pub fn count(c: usize) -> usize {
        let h = c / 4;
        2 * c + 3 * c * h + h + 3 * h * h + h + h * c + c
    }
}

/// Same-padded convolution along frequency followed by a bias.
fn freq_conv(g: &mut Graph, store: &ParamStore, x: Var, (w, b): (ParamId, ParamId)) -> Result<Var> {
    let wv = g.param(store, w);
    let k = store.get(w).shape()[0];
    let y = g.conv1d(x, wv, FREQ_AXIS, 1, k / 2, k / 2)?;
    let bv = g.param(store, b);
    g.add_bias(y, bv)
}

pub fn conv_module_forward(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    p: &ConvModuleParams,
    groups: usize,
) -> Result<Var> {
    let c = *g.shape(x).last().unwrap_or(&0);
    if g.shape(x).len() != 4 || c != p.channels {
        return Err(Error::shape(
            "conv_module",
            format!("input {:?} for a {}-channel module", g.shape(x), p.channels),
        ));
    }
    let gamma = g.param(store, p.norm_gamma);
    let beta = g.param(store, p.norm_beta);
    let mut h = g.group_norm(x, groups, gamma, beta, GROUP_NORM_EPS)?;
    h = freq_conv(g, store, h, p.convs[0])?;
    h = g.gelu(h)?;
    h = freq_conv(g, store, h, p.convs[1])?;
    h = g.gelu(h)?;
    h = freq_conv(g, store, h, p.convs[2])?;
    g.add(x, h)
}

/// Per-band strided convolution weights `[stride, C_in, C_out]` and biases.
#[derive(Debug, Clone)]
pub struct SdLayerParams {
    pub kernels: [ParamId; 3],
    pub biases: [ParamId; 3],
}

impl SdLayerParams {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        strides: [usize; 3],
        c_in: usize,
        c_out: usize,
        rng: &mut RngState,
    ) -> Self {
        let kernels = std::array::from_fn(|b| {
            let s = strides[b];
            store.weight(format!("{prefix}.{}.weight", BAND_NAMES[b]), &[s, c_in, c_out], s * c_in, rng)
        });
        let biases = std::array::from_fn(|b| store.zeros(format!("{prefix}.{}.bias", BAND_NAMES[b]), &[c_out]));
        Self { kernels, biases }
    }

    pub fn count(strides: [usize; 3], c_in: usize, c_out: usize) -> usize {
        strides.iter().map(|s| s * c_in * c_out + c_out).sum()
    }
}

fn check_plan(op: &'static str, g: &Graph, x: Var, width: usize) -> Result<()> {
    match g.shape(x) {
        [_, f, _, _] if *f == width => Ok(()),
        s => Err(Error::dim(op, format!("input {s:?} does not match plan width {width}"))),
    }
}

/// Slices `x` into the plan's three frequency bands.
pub(crate) fn split_bands(g: &mut Graph, x: Var, plan: &BandPlan) -> Result<[Var; 3]> {
    let mut out = [x; 3];
    for (o, b) in out.iter_mut().zip(&plan.bands) {
        *o = g.slice(x, FREQ_AXIS, b.start, b.width)?;
    }
    Ok(out)
}

fn sd_layer_bands(g: &mut Graph, store: &ParamStore, bands: [Var; 3], plan: &BandPlan, p: &SdLayerParams) -> Result<Var> {
    let mut outs = Vec::with_capacity(3);
    for (i, b) in plan.bands.iter().enumerate() {
        let w = g.param(store, p.kernels[i]);
        if store.get(p.kernels[i]).shape()[0] != b.stride {
            return Err(Error::dim("sd_layer", format!("{} kernel does not match stride {}", BAND_NAMES[i], b.stride)));
        }
        let y = g.conv1d(bands[i], w, FREQ_AXIS, b.stride, 0, b.right_pad)?;
        let bias = g.param(store, p.biases[i]);
        outs.push(g.add_bias(y, bias)?);
    }
    let y = g.concat(&outs, FREQ_AXIS)?;
    g.gelu(y)
}

/// Compresses `[B, F_in, T, C_in]` to `[B, F_out, T, C_out]` band by band.
pub fn sd_layer_forward(g: &mut Graph, store: &ParamStore, x: Var, plan: &BandPlan, p: &SdLayerParams) -> Result<Var> {
    check_plan("sd_layer", g, x, plan.input_width)?;
    let bands = split_bands(g, x, plan)?;
    sd_layer_bands(g, store, bands, plan, p)
}

/// Runs each band's module stack on its own slice.
pub(crate) fn band_modules(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    plan: &BandPlan,
    modules: &[Vec<ConvModuleParams>; 3],
    groups: usize,
) -> Result<[Var; 3]> {
    let mut bands = split_bands(g, x, plan)?;
    for (band, stack) in bands.iter_mut().zip(modules) {
        for m in stack {
            *band = conv_module_forward(g, store, *band, m, groups)?;
        }
    }
    Ok(bands)
}

#[derive(Debug, Clone)]
pub struct SdBlockParams {
    pub c_in: usize,
    pub c_out: usize,
    pub modules: [Vec<ConvModuleParams>; 3],
    pub sd: SdLayerParams,
}

pub(crate) fn init_band_modules(
    store: &mut ParamStore,
    prefix: &str,
    counts: [usize; 3],
    c: usize,
    rng: &mut RngState,
) -> [Vec<ConvModuleParams>; 3] {
    std::array::from_fn(|b| {
        (0..counts[b])
            .map(|j| ConvModuleParams::init(store, &format!("{prefix}.{}.module{j}", BAND_NAMES[b]), c, rng))
            .collect()
    })
}

impl SdBlockParams {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &ModelConfig,
        c_in: usize,
        c_out: usize,
        rng: &mut RngState,
    ) -> Self {
        let modules = init_band_modules(store, prefix, cfg.conv_modules, c_in, rng);
        let sd = SdLayerParams::init(store, &format!("{prefix}.down"), cfg.band_split.strides, c_in, c_out, rng);
        Self { c_in, c_out, modules, sd }
    }

    pub fn count(cfg: &ModelConfig, c_in: usize, c_out: usize) -> usize {
        cfg.conv_modules.iter().sum::<usize>() * ConvModuleParams::count(c_in)
            + SdLayerParams::count(cfg.band_split.strides, c_in, c_out)
    }
}

/// Returns `(down-sampled output, skip)`; the skip is the full-resolution
/// tensor after the convolution modules.
pub fn sd_block_forward(
    g: &mut Graph,
    store: &ParamStore,
    x: Var,
    plan: &BandPlan,
    p: &SdBlockParams,
    groups: usize,
) -> Result<(Var, Var)> {
    check_plan("sd_block", g, x, plan.input_width)?;
    let bands = band_modules(g, store, x, plan, &p.modules, groups)?;
    let skip = if p.modules.iter().all(Vec::is_empty) { x } else { g.concat(&bands, FREQ_AXIS)? };
    let out = sd_layer_bands(g, store, bands, plan, &p.sd)?;
    Ok((out, skip))
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub blocks: Vec<SdBlockParams>,
    pub plans: Vec<BandPlan>,
    pub groups: usize,
}

impl Encoder {
    pub fn init(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut RngState) -> Result<Self> {
        let plans = cfg.plans()?;
        let blocks = (0..cfg.n_blocks())
            .map(|i| SdBlockParams::init(store, &format!("encoder.block{i}"), cfg, cfg.block_in_channels(i), cfg.channels[i], rng))
            .collect();
        Ok(Self { blocks, plans, groups: cfg.norm_groups })
    }

    pub fn count(cfg: &ModelConfig) -> usize {
        (0..cfg.n_blocks()).map(|i| SdBlockParams::count(cfg, cfg.block_in_channels(i), cfg.channels[i])).sum()
    }

    /// `[B, F, T, 4]` → latent `[B, F_last, T, C_last]` plus skips ordered
    /// shallow to deep.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, y: Var) -> Result<(Var, Vec<Var>)> {
        let mut x = y;
        let mut skips = Vec::with_capacity(self.blocks.len());
        for (block, plan) in self.blocks.iter().zip(&self.plans) {
            let (out, skip) = sd_block_forward(g, store, x, plan, block, self.groups)?;
            skips.push(skip);
            x = out;
        }
        Ok((x, skips))
    }
}
