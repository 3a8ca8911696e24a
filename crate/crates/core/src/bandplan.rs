//! Low/mid/high frequency partition and the compression bookkeeping that
//! goes with it.
//!
//! Band widths are `floor(p_low·F)`, `floor(p_mid·F)` and the remainder for
//! the high band, so rounding slack always lands in the high band. Each band
//! is right-padded up to a multiple of its stride before the non-overlapping
//! strided convolution, giving `ceil(width / stride)` output bins.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added before flooring `p·F` so that exact products such as `0.25·16`
/// are not knocked down by representation error.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSplitSpec {
    /// Fractions of the frequency axis: low, mid, high.
    pub proportions: [f64; 3],
    /// Down-sampling factor per band.
    pub strides: [usize; 3],
}

impl Default for BandSplitSpec {
    fn default() -> Self {
        Self { proportions: [0.175, 0.392, 0.433], strides: [1, 4, 16] }
    }
}

impl BandSplitSpec {
    pub fn new(proportions: [f64; 3], strides: [usize; 3]) -> Result<Self> {
        let s = Self { proportions, strides };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config("band_split.proportions", "must be finite and non-negative"));
        }
        let total: f64 = self.proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("band_split.proportions", format!("must sum to 1, got {total}")));
        }
        if self.strides.contains(&0) {
            return Err(Error::config("band_split.strides", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub start: usize,
    pub width: usize,
    pub stride: usize,
    pub right_pad: usize,
    pub out_width: usize,
}

impl Band {
    /// Width after right-padding to a stride multiple.
    pub fn padded_width(&self) -> usize {
        self.width + self.right_pad
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPlan {
    pub input_width: usize,
    pub bands: [Band; 3],
    pub output_width: usize,
}

impl BandPlan {
    /// `F_out / F_in`.
    pub fn retention(&self) -> f64 {
        self.output_width as f64 / self.input_width as f64
    }

    /// Offsets of each band in the down-sampled axis.
    pub fn out_starts(&self) -> [usize; 3] {
        let b = &self.bands;
        [0, b[0].out_width, b[0].out_width + b[1].out_width]
    }
}

pub const BAND_NAMES: [&str; 3] = ["low", "mid", "high"];

/// Partitions `f_in` bins according to `spec`.
pub fn plan(f_in: usize, spec: &BandSplitSpec) -> Result<BandPlan> {
    spec.validate()?;
    if f_in < 3 {
        return Err(Error::config("freq_bins", format!("need at least 3 bins, got {f_in}")));
    }
    let low = (spec.proportions[0] * f_in as f64 + FLOOR_SLACK).floor() as usize;
    let mid = (spec.proportions[1] * f_in as f64 + FLOOR_SLACK).floor() as usize;
    let high = f_in.saturating_sub(low + mid);
    let widths = [low, mid, high];
    if let Some(i) = widths.iter().position(|&w| w == 0) {
        return Err(Error::config(
            "band_split.proportions",
            format!("{} band is empty at {f_in} bins (widths {widths:?})", BAND_NAMES[i]),
        ));
    }
    let mut start = 0;
    let bands = std::array::from_fn(|i| {
        let (width, stride) = (widths[i], spec.strides[i]);
        let out_width = width.div_ceil(stride);
        let b = Band { start, width, stride, right_pad: out_width * stride - width, out_width };
        start += width;
        b
    });
    let output_width = bands.iter().map(|b: &Band| b.out_width).sum();
    Ok(BandPlan { input_width: f_in, bands, output_width })
}

/// Idealized per-block reduction `1 − Σ p_i / s_i`, ignoring rounding.
pub fn global_compression(spec: &BandSplitSpec) -> f64 {
    1.0 - spec.proportions.iter().zip(&spec.strides).map(|(p, &s)| p / s as f64).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub gcr: f64,
    /// `F` before the first block and after each block.
    pub widths: Vec<usize>,
    pub plans: Vec<BandPlan>,
}

/// Applies [`plan`] `n_blocks` times with the same proportions.
pub fn cascade(f0: usize, spec: &BandSplitSpec, n_blocks: usize) -> Result<CompressionReport> {
    if n_blocks == 0 {
        return Err(Error::config("blocks", "must be >= 1"));
    }
    let mut widths = vec![f0];
    let mut plans = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let p = plan(*widths.last().unwrap(), spec)?;
        widths.push(p.output_width);
        plans.push(p);
    }
    Ok(CompressionReport { gcr: global_compression(spec), widths, plans })
}

impl fmt::Display for CompressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "global compression ratio (ideal): {:.2}%", 100.0 * self.gcr)?;
        writeln!(f, "block  F_in  band  start  width  stride  pad  out   F_out  retention")?;
        for (i, p) in self.plans.iter().enumerate() {
            for (j, b) in p.bands.iter().enumerate() {
                let tail = if j == 2 {
                    format!("  {:>5}  {:.4}", p.output_width, p.retention())
                } else {
                    String::new()
                };
                writeln!(
                    f,
                    "{:>5}  {:>4}  {:<4}  {:>5}  {:>5}  {:>6}  {:>3}  {:>4}{}",
                    i + 1,
                    p.input_width,
                    BAND_NAMES[j],
                    b.start,
                    b.width,
                    b.stride,
                    b.right_pad,
                    b.out_width,
                    tail
                )?;
            }
        }
        let cascade: Vec<String> = self.widths.iter().map(ToString::to_string).collect();
        write!(f, "cascade: {}", cascade.join(" -> "))
    }
}
