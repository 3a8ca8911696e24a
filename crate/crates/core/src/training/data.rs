use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::spectral::AudioBuffer;

/// Relative L2 mismatch between mixture and stem sum tolerated on load.
pub const MIXTURE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub segment_seconds: f64,
    pub segment_hop_seconds: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Gain range for scale augmentation; `[1, 1]` disables it.
    pub scale_range: [f64; 2],
    pub remix: bool,
    /// Write a checkpoint every this many steps (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            segment_seconds: 11.0,
            segment_hop_seconds: 1.0,
            lr: 5e-4,
            batch_size: 4,
            steps: 1000,
            seed: 0,
            scale_range: [0.25, 1.25],
            remix: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_seconds > 0.0) {
            return Err(Error::config("train.segment_seconds", "must be positive"));
        }
        if !(self.segment_hop_seconds > 0.0 && self.segment_hop_seconds <= self.segment_seconds) {
            return Err(Error::config("train.segment_hop_seconds", "must be in (0, segment_seconds]"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("train.lr", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config("train.scale_range", format!("[{lo}, {hi}] must satisfy 0 < lo <= hi")));
        }
        Ok(())
    }
}

/// Segment boundaries `(start, end)` in samples. Tracks shorter than one
/// segment yield a single segment that runs past the end (zero-padded).
pub fn segment(len: usize, sample_rate: u32, cfg: &TrainConfig) -> Vec<(usize, usize)> {
    let seg = (cfg.segment_seconds * sample_rate as f64).round().max(1.0) as usize;
    let hop = (cfg.segment_hop_seconds * sample_rate as f64).round().max(1.0) as usize;
    if len <= seg {
        return vec![(0, seg)];
    }
    let count = (len - seg) / hop + 1;
    (0..count).map(|i| (i * hop, i * hop + seg)).collect()
}

/// Aligned source stems plus their mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct StemSet {
    names: Vec<String>,
    stems: Vec<AudioBuffer>,
    mixture: AudioBuffer,
}

impl StemSet {
    /// Builds a set whose mixture is the exact stem sum.
    pub fn from_stems(names: Vec<String>, stems: Vec<AudioBuffer>) -> Result<Self> {
        if names.len() != stems.len() || stems.is_empty() {
            return Err(Error::config("sources", format!("{} names for {} stems", names.len(), stems.len())));
        }
        let mixture = AudioBuffer::sum(&stems)?;
        Ok(Self { names, stems, mixture })
    }

    /// Wraps a loaded mixture; warns when it is not the stem sum.
    pub fn with_mixture(names: Vec<String>, stems: Vec<AudioBuffer>, mixture: AudioBuffer) -> Result<Self> {
        let set = Self::from_stems(names, stems)?;
        if mixture.channels() != set.mixture.channels() || mixture.len() != set.mixture.len() {
            return Err(Error::config("mixture", "shape differs from the stems"));
        }
        let mismatch = relative_mismatch(&mixture, &set.mixture);
        if mismatch > MIXTURE_TOLERANCE {
            log::warn!("mixture differs from the stem sum by {mismatch:.2e} (relative L2)");
        }
        Ok(Self { mixture, ..set })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn stems(&self) -> &[AudioBuffer] {
        &self.stems
    }

    pub fn stem(&self, name: &str) -> Option<&AudioBuffer> {
        self.names.iter().position(|n| n == name).map(|i| &self.stems[i])
    }

    pub fn mixture(&self) -> &AudioBuffer {
        &self.mixture
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.mixture.sample_rate()
    }

    /// Mixture-vs-stem-sum relative L2 error.
    pub fn mixture_error(&self) -> f64 {
        match AudioBuffer::sum(&self.stems) {
            Ok(sum) => relative_mismatch(&self.mixture, &sum),
            Err(_) => f64::INFINITY,
        }
    }

    /// Cuts `start..end` out of every stem (zero-padded) and re-sums.
    pub fn slice(&self, start: usize, end: usize) -> StemSet {
        let stems: Vec<_> = self.stems.iter().map(|s| s.segment(start, end - start)).collect();
        let mixture = AudioBuffer::sum(&stems).expect("stems share shape");
        StemSet { names: self.names.clone(), stems, mixture }
    }

    /// Reorders stems to `order`; every name must be present.
    pub fn reordered(&self, order: &[String]) -> Result<StemSet> {
        let stems = order
            .iter()
            .map(|n| self.stem(n).cloned().ok_or_else(|| Error::config("sources", format!("missing stem `{n}`"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(StemSet { names: order.to_vec(), stems, mixture: self.mixture.clone() })
    }

    fn resum(&mut self) {
        self.mixture = AudioBuffer::sum(&self.stems).expect("stems share shape");
    }
}

fn relative_mismatch(a: &AudioBuffer, b: &AudioBuffer) -> f64 {
    let mut num = 0.0;
    for (x, y) in a.samples().iter().flatten().zip(b.samples().iter().flatten()) {
        num += (x - y) * (x - y);
    }
    num.sqrt() / b.energy().sqrt().max(1e-12)
}

/// Shuffles each source independently across the batch, then re-mixes.
pub fn augment_remix(batch: &mut [StemSet], rng: &mut RngState) {
    if batch.len() < 2 {
        return;
    }
    let n_src = batch[0].stems.len();
    for s in 0..n_src {
        let perm = rng.permutation(batch.len());
        let pool: Vec<AudioBuffer> = batch.iter().map(|b| b.stems[s].clone()).collect();
        for (item, &p) in batch.iter_mut().zip(&perm) {
            item.stems[s] = pool[p].clone();
        }
    }
    batch.iter_mut().for_each(StemSet::resum);
}

/// Multiplies every stem by its own gain drawn uniformly from `range`,
/// then re-mixes. Returns the gains, item-major.
pub fn augment_scale(batch: &mut [StemSet], rng: &mut RngState, range: [f64; 2]) -> Vec<f64> {
    let mut gains = Vec::new();
    for item in batch.iter_mut() {
        for stem in &mut item.stems {
            let gain = if range[0] == range[1] { range[0] } else { rng.uniform(range[0], range[1]) };
            if gain != 1.0 {
                *stem = stem.scaled(gain);
            }
            gains.push(gain);
        }
        item.resum();
    }
    gains
}
