//! Sparse up-sampling decoder.
//!
//! Stages run deep to shallow. Each stage inverts one encoder block: a
//! per-band transposed convolution (kernel = stride) back to the block's
//! input resolution, fusion with that block's skip (all stages except the
//! bottom one), then band-local convolution modules mirroring the encoder.

use crate::bandplan::{BandPlan, BAND_NAMES};
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamId, ParamStore, Var};
use crate::rng::RngState;

use super::config::ModelConfig;
use super::encoder::{band_modules, init_band_modules, ConvModuleParams};

const FREQ_AXIS: usize = 1;
const FEATURE_AXIS: usize = 3;

/// Per-band transposed-convolution weights `[stride, C_target, C_in]`.
#[derive(Debug, Clone)]
pub struct SuLayerParams {
    pub kernels: [ParamId; 3],
    pub biases: [ParamId; 3],
}

impl SuLayerParams {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        strides: [usize; 3],
        c_in: usize,
        c_target: usize,
        rng: &mut RngState,
    ) -> Self {
        let kernels = std::array::from_fn(|b| {
            let s = strides[b];
            store.weight(format!("{prefix}.{}.weight", BAND_NAMES[b]), &[s, c_target, c_in], c_in, rng)
        });
        let biases = std::array::from_fn(|b| store.zeros(format!("{prefix}.{}.bias", BAND_NAMES[b]), &[c_target]));
        Self { kernels, biases }
    }

    pub fn count(strides: [usize; 3], c_in: usize, c_target: usize) -> usize {
        strides.iter().map(|s| s * c_target * c_in + c_target).sum()
    }
}

/// `[B, F_out, T, C_in]` → `[B, F_in, T, C_target]`, cropping each band's
/// right padding.
pub fn su_layer_forward(g: &mut Graph, store: &ParamStore, x: Var, plan: &BandPlan, p: &SuLayerParams) -> Result<Var> {
    match g.shape(x) {
        [_, f, _, _] if *f == plan.output_width => {}
        s => return Err(Error::dim("su_layer", format!("input {s:?} does not match plan output width {}", plan.output_width))),
    }
    let starts = plan.out_starts();
    let mut outs = Vec::with_capacity(3);
    for (i, band) in plan.bands.iter().enumerate() {
        let slice = g.slice(x, FREQ_AXIS, starts[i], band.out_width)?;
        let w = g.param(store, p.kernels[i]);
        let y = g.conv1d_transposed(slice, w, FREQ_AXIS, band.stride, band.width)?;
        let b = g.param(store, p.biases[i]);
        outs.push(g.add_bias(y, b)?);
    }
    g.concat(&outs, FREQ_AXIS)
}

/// Sum, duplicate along features, 3×3 convolution, GLU.
#[derive(Debug, Clone)]
pub struct FusionParams {
    pub kernel: ParamId,
    pub bias: ParamId,
}

impl FusionParams {
    pub fn init(store: &mut ParamStore, prefix: &str, c: usize, rng: &mut RngState) -> Self {
        Self {
            kernel: store.weight(format!("{prefix}.weight"), &[3, 3, 2 * c, 2 * c], 9 * 2 * c, rng),
            bias: store.zeros(format!("{prefix}.bias"), &[2 * c]),
        }
    }

    pub fn count(c: usize) -> usize {
        9 * 4 * c * c + 2 * c
    }
}

pub fn fusion_forward(g: &mut Graph, store: &ParamStore, skip: Var, up: Var, p: &FusionParams) -> Result<Var> {
    if g.shape(skip) != g.shape(up) {
        return Err(Error::shape("fusion", format!("skip {:?} vs up {:?}", g.shape(skip), g.shape(up))));
    }
    let s = g.add(skip, up)?;
    let d = g.concat(&[s, s], FEATURE_AXIS)?;
    let k = g.param(store, p.kernel);
    let y = g.conv2d_same(d, k)?;
    let b = g.param(store, p.bias);
    let y = g.add_bias(y, b)?;
    g.glu(y)
}

#[derive(Debug, Clone)]
pub struct SuStageParams {
    pub su: SuLayerParams,
    pub fusion: Option<FusionParams>,
    pub modules: [Vec<ConvModuleParams>; 3],
}

#[derive(Debug, Clone)]
pub struct Decoder {
    /// Indexed like the encoder blocks they invert (0 = shallowest).
    pub stages: Vec<SuStageParams>,
    pub plans: Vec<BandPlan>,
    pub groups: usize,
    pub sources: usize,
}

impl Decoder {
    pub fn init(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut RngState) -> Result<Self> {
        let plans = cfg.plans()?;
        let mut stages: Vec<SuStageParams> = Vec::with_capacity(cfg.n_blocks());
        // register deep to shallow so parameter order follows data flow
        for i in (0..cfg.n_blocks()).rev() {
            let prefix = format!("decoder.stage{i}");
            let c_target = cfg.stage_out_channels(i);
            let su = SuLayerParams::init(store, &format!("{prefix}.up"), cfg.band_split.strides, cfg.channels[i], c_target, rng);
            let fusion = (i > 0).then(|| FusionParams::init(store, &format!("{prefix}.fusion"), c_target, rng));
            let modules = init_band_modules(store, &prefix, cfg.conv_modules, c_target, rng);
            stages.push(SuStageParams { su, fusion, modules });
        }
        stages.reverse();
        Ok(Self { stages, plans, groups: cfg.norm_groups, sources: cfg.sources.len() })
    }

    pub fn count(cfg: &ModelConfig) -> usize {
        (0..cfg.n_blocks())
            .map(|i| {
                let c_target = cfg.stage_out_channels(i);
                SuLayerParams::count(cfg.band_split.strides, cfg.channels[i], c_target)
                    + if i > 0 { FusionParams::count(c_target) } else { 0 }
                    + cfg.conv_modules.iter().sum::<usize>() * ConvModuleParams::count(c_target)
            })
            .sum()
    }

    /// Latent plus encoder skips → `[B, F, T, 4·sources]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, latent: Var, skips: &[Var]) -> Result<Var> {
        if skips.len() != self.stages.len() {
            return Err(Error::shape("decoder", format!("{} skips for {} stages", skips.len(), self.stages.len())));
        }
        let mut x = latent;
        for i in (0..self.stages.len()).rev() {
            let stage = &self.stages[i];
            let plan = &self.plans[i];
            x = su_layer_forward(g, store, x, plan, &stage.su)?;
            if let Some(f) = &stage.fusion {
                x = fusion_forward(g, store, skips[i], x, f)?;
            }
            if stage.modules.iter().any(|m| !m.is_empty()) {
                let bands = band_modules(g, store, x, plan, &stage.modules, self.groups)?;
                x = g.concat(&bands, FREQ_AXIS)?;
            }
        }
        Ok(x)
    }

    /// Splits the decoder output into one `[B, F, T, 4]` tensor per source.
    pub fn split_sources(&self, g: &mut Graph, out: Var) -> Result<Vec<Var>> {
        (0..self.sources).map(|s| g.slice(out, FEATURE_AXIS, 4 * s, 4)).collect()
    }
}
