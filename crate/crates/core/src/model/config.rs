use serde::{Deserialize, Serialize};

use crate::bandplan::{cascade, BandPlan, BandSplitSpec};
use crate::error::{Error, Result};
use crate::spectral::StftConfig;

/// Spectrogram features fed to the model: stereo re/im pairs.
pub const INPUT_FEATURES: usize = 4;
/// Output features per source.
pub const SOURCE_FEATURES: usize = 4;

/// Which axis the first recurrent pass of a dual-path layer runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PassOrder {
    #[default]
    TimeFirst,
    FrequencyFirst,
}

/// Where skip fusion sits relative to each up-sampling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionPlacement {
    /// Up-sample first, then fuse with the skip at the up-sampled resolution.
    #[default]
    AfterUpsample,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualPathConfig {
    pub layers: usize,
    pub hidden_odd: usize,
    pub hidden_even: usize,
    pub order: PassOrder,
}

impl Default for DualPathConfig {
    fn default() -> Self {
        Self { layers: 6, hidden_odd: 128, hidden_even: 256, order: PassOrder::TimeFirst }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub band_split: BandSplitSpec,
    /// Feature width after each down-sampling block.
    pub channels: Vec<usize>,
    /// Convolution modules per band (low, mid, high) in every block.
    pub conv_modules: [usize; 3],
    pub norm_groups: usize,
    pub dual_path: DualPathConfig,
    pub fusion: FusionPlacement,
    pub sources: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44_100,
            stft: StftConfig::default(),
            band_split: BandSplitSpec::default(),
            channels: vec![32, 64, 128],
            conv_modules: [3, 2, 1],
            norm_groups: 4,
            dual_path: DualPathConfig::default(),
            fusion: FusionPlacement::AfterUpsample,
            sources: ["drums", "bass", "other", "vocals"].map(String::from).to_vec(),
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests: 64 input bins, ladder 8/16/32, two
    /// dual-path layers.
    pub fn tiny() -> Self {
        Self {
            sample_rate: 8_000,
            stft: StftConfig { fft_size: 126, hop: 42 },
            band_split: BandSplitSpec::default(),
            channels: vec![8, 16, 32],
            conv_modules: [1, 1, 1],
            norm_groups: 4,
            dual_path: DualPathConfig { layers: 2, hidden_odd: 4, hidden_even: 8, order: PassOrder::TimeFirst },
            fusion: FusionPlacement::AfterUpsample,
            sources: vec!["bass".into(), "drums".into()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::config("sample_rate", "must be positive"));
        }
        self.stft.validate()?;
        self.band_split.validate()?;
        if self.channels.is_empty() {
            return Err(Error::config("channels", "need at least one block"));
        }
        if self.channels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("channels", format!("ladder {:?} must be strictly increasing", self.channels)));
        }
        let g = self.norm_groups;
        if g == 0 || !INPUT_FEATURES.is_multiple_of(g) {
            return Err(Error::config("norm_groups", format!("{g} must divide the {INPUT_FEATURES} input features")));
        }
        for &c in &self.channels {
            if c % 4 != 0 || c % g != 0 {
                return Err(Error::config("channels", format!("{c} must be divisible by 4 and by norm_groups {g}")));
            }
        }
        let [lo, mid, hi] = self.conv_modules;
        if !(lo >= mid && mid >= hi) {
            return Err(Error::config("conv_modules", format!("{:?} must be non-increasing", self.conv_modules)));
        }
        let dp = &self.dual_path;
        if dp.layers == 0 || !dp.layers.is_multiple_of(2) {
            return Err(Error::config("dual_path.layers", format!("{} must be even and positive", dp.layers)));
        }
        if dp.hidden_odd == 0 || dp.hidden_even != 2 * dp.hidden_odd {
            return Err(Error::config(
                "dual_path.hidden_even",
                format!("{} must be twice hidden_odd ({})", dp.hidden_even, dp.hidden_odd),
            ));
        }
        if self.sources.is_empty() {
            return Err(Error::config("sources", "need at least one source"));
        }
        let mut names = self.sources.clone();
        names.sort();
        names.dedup();
        if names.len() != self.sources.len() {
            return Err(Error::config("sources", "names must be unique"));
        }
        if self.sources.iter().any(|s| s.is_empty() || s.contains(['/', '\\'])) {
            return Err(Error::config("sources", "names must be non-empty file stems"));
        }
        self.plans()?;
        Ok(())
    }

    pub fn freq_bins(&self) -> usize {
        self.stft.bins()
    }

    pub fn n_blocks(&self) -> usize {
        self.channels.len()
    }

    /// Band plans of every down-sampling block, shallow to deep.
    pub fn plans(&self) -> Result<Vec<BandPlan>> {
        Ok(cascade(self.freq_bins(), &self.band_split, self.n_blocks())?.plans)
    }

    /// Feature width entering block `i`.
    pub fn block_in_channels(&self, i: usize) -> usize {
        if i == 0 {
            INPUT_FEATURES
        } else {
            self.channels[i - 1]
        }
    }

    /// Feature width produced by decoder stage `i` (which inverts block `i`).
    pub fn stage_out_channels(&self, i: usize) -> usize {
        if i == 0 {
            SOURCE_FEATURES * self.sources.len()
        } else {
            self.channels[i - 1]
        }
    }

    pub fn latent_channels(&self) -> usize {
        *self.channels.last().expect("validated")
    }

    /// Copy with every channel width multiplied by `factor`.
    pub fn widened(&self, factor: usize) -> Self {
        let mut c = self.clone();
        c.channels.iter_mut().for_each(|v| *v *= factor);
        c.dual_path.hidden_odd *= factor;
        c.dual_path.hidden_even *= factor;
        c
    }
}
