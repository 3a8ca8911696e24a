//! Deterministic synthetic stems with known spectral occupancy.
//!
//! | source   | content                                                  |
//! |----------|----------------------------------------------------------|
//! | `bass`   | always band-limited to 30–250 Hz                         |
//! | `drums`  | clicks with fast exponential decay, high-passed at 300 Hz|
//! | `vocals` | 250–1200 Hz                                              |
//! | `other`  | 1200–4000 Hz (capped at 45% of the sample rate)          |
//!
//! Other source names get consecutive octave bands starting at 250 Hz.
//! The `kind` picks the signal family used for the tonal sources; `drums`
//! is always a click pattern.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::{fft_forward, fft_inverse};
use crate::rng::RngState;
use crate::spectral::AudioBuffer;
use crate::training::StemSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    BandLimitedNoise,
    SineChords,
    ClickPattern,
    Mixed,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 4] =
        [FixtureKind::BandLimitedNoise, FixtureKind::SineChords, FixtureKind::ClickPattern, FixtureKind::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::BandLimitedNoise => "band-limited-noise",
            FixtureKind::SineChords => "sine-chords",
            FixtureKind::ClickPattern => "click-pattern",
            FixtureKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown fixture kind `{s}`")))
    }
}

/// `(low, high)` pass band in Hz for a tonal source.
pub fn source_band(name: &str, index: usize, sample_rate: u32) -> (f64, f64) {
    let cap = 0.45 * sample_rate as f64;
    let (lo, hi) = match name {
        "bass" => (30.0, 250.0),
        "drums" => (300.0, cap),
        "vocals" => (250.0, 1200.0),
        "other" => (1200.0, 4000.0),
        _ => {
            let lo = 250.0 * 2f64.powi(index as i32);
            (lo, 2.0 * lo)
        }
    };
    (lo.min(cap * 0.5), hi.min(cap))
}

/// Zeroes every DFT bin outside `[lo, hi]` Hz.
fn band_limit(x: &mut [f64], sample_rate: u32, lo: f64, hi: f64) {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate as f64 / n as f64;
        if f < lo || f > hi {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    fft_inverse(n).process(&mut buf);
    for (v, c) in x.iter_mut().zip(&buf) {
        *v = c.re / n as f64;
    }
}

fn noise(len: usize, rng: &mut RngState) -> Vec<f64> {
    (0..len).map(|_| rng.normal()).collect()
}

/// A few sustained partials inside the band, re-voiced every ~0.5 s.
fn chords(len: usize, rate: u32, (lo, hi): (f64, f64), rng: &mut RngState) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let seg = (rate as usize / 2).max(1);
    let mut start = 0;
    while start < len {
        let end = (start + seg).min(len);
        for _ in 0..3 {
            let f = rng.uniform(lo, hi);
            let phase = rng.uniform(0.0, 2.0 * PI);
            let amp = rng.uniform(0.5, 1.0);
            for (i, v) in out[start..end].iter_mut().enumerate() {
                // short linear ramps avoid clicks at chord changes
                let ramp = ((i.min(end - start - 1 - i)) as f64 / 64.0).min(1.0);
                let t = (start + i) as f64 / rate as f64;
                *v += amp * ramp * (2.0 * PI * f * t + phase).sin();
            }
        }
        start = end;
    }
    out
}

fn clicks(len: usize, rate: u32, rng: &mut RngState) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let period = ((rate as f64) * rng.uniform(0.18, 0.3)) as usize;
    let decay = rate as f64 * 0.004;
    let mut pos = rng.below(period.max(1) as u64) as usize;
    while pos < len {
        let amp = rng.uniform(0.6, 1.0);
        for (i, v) in out[pos..len.min(pos + 8 * decay as usize + 1)].iter_mut().enumerate() {
            *v += amp * (-(i as f64) / decay).exp() * rng.normal();
        }
        pos += period;
    }
    out
}

fn peak_normalize(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

fn tonal(kind: FixtureKind, index: usize, len: usize, rate: u32, band: (f64, f64), rng: &mut RngState) -> Vec<f64> {
    match kind {
        FixtureKind::BandLimitedNoise => noise(len, rng),
        FixtureKind::SineChords => chords(len, rate, band, rng),
        FixtureKind::ClickPattern => {
            // slower, longer bursts so the band limit leaves audible content
            let mut c = clicks(len, rate, rng);
            let k = (rate as f64 * 0.02) as usize;
            let mut acc = 0.0;
            for v in c.iter_mut() {
                acc = acc * (1.0 - 1.0 / k.max(1) as f64) + *v;
                *v = acc;
            }
            c
        }
        FixtureKind::Mixed => {
            if index.is_multiple_of(2) {
                chords(len, rate, band, rng)
            } else {
                noise(len, rng)
            }
        }
    }
}

/// Generates one stereo track. Each stem comes from its own forked stream,
/// so a stem does not depend on how many draws its siblings used.
pub fn synth_fixture(kind: FixtureKind, sources: &[String], seconds: f64, sample_rate: u32, seed: u64) -> Result<StemSet> {
    let len = (seconds * sample_rate as f64).round() as usize;
    if len < 2 {
        return Err(Error::config("seconds", "fixture must be at least two samples long"));
    }
    let mut root = RngState::new(seed);
    let mut stems = Vec::with_capacity(sources.len());
    for (i, name) in sources.iter().enumerate() {
        let mut rng = root.fork();
        let band = source_band(name, i, sample_rate);
        let mut mono = if name == "drums" { clicks(len, sample_rate, &mut rng) } else { tonal(kind, i, len, sample_rate, band, &mut rng) };
        band_limit(&mut mono, sample_rate, band.0, band.1);
        peak_normalize(&mut mono, 0.3);
        let pan = rng.uniform(0.3, 0.7);
        let samples = vec![mono.iter().map(|v| v * (1.0 - pan) * 2.0).collect(), mono.iter().map(|v| v * pan * 2.0).collect()];
        stems.push(AudioBuffer::new(samples, sample_rate)?);
    }
    StemSet::from_stems(sources.to_vec(), stems)
}

/// Fraction of `audio`'s energy in DFT bins below `hz`.
pub fn energy_below(audio: &AudioBuffer, hz: f64) -> f64 {
    let (mut below, mut total) = (0.0, 0.0);
    for ch in audio.samples() {
        let n = ch.len();
        let mut buf: Vec<Complex64> = ch.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(n).process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            let f = k.min(n - k) as f64 * audio.sample_rate() as f64 / n as f64;
            let e = c.norm_sqr();
            total += e;
            if f < hz {
                below += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        below / total
    }
}
