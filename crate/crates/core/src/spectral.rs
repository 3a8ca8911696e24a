//! Waveform ↔ complex spectrogram, exactly as the model consumes it.
//!
//! Frames are rectangular (no window). The signal is zero-padded by
//! `fft_size − hop` samples on the left and by at least as much on the right
//! (rounded up so the last frame ends on the padded boundary), which makes
//! every original sample fall under the same number of frames. The inverse
//! overlap-adds frames and divides by that per-sample frame count.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ops::{fft_forward, fft_inverse};
use crate::numerics::Tensor;

/// Multi-channel waveform; `samples[ch][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if !(1..=2).contains(&samples.len()) {
            return Err(Error::config("channels", format!("must be 1 or 2, got {}", samples.len())));
        }
        let len = samples[0].len();
        if len == 0 {
            return Err(Error::config("length", "audio must have at least one sample"));
        }
        if samples.iter().any(|c| c.len() != len) {
            return Err(Error::config("length", "channels differ in length"));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("samples", "non-finite sample"));
        }
        if sample_rate == 0 {
            return Err(Error::config("sample_rate", "must be positive"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; channels], sample_rate)
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.samples[ch]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.samples[ch]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Duplicates a mono buffer to two channels; stereo is returned as is.
    pub fn to_stereo(&self) -> AudioBuffer {
        let mut samples = self.samples.clone();
        if samples.len() == 1 {
            samples.push(samples[0].clone());
        }
        AudioBuffer { samples, sample_rate: self.sample_rate }
    }

    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|c| c.iter().map(|v| v * gain).collect()).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// `start..start+len`, zero-filled past the end.
    pub fn segment(&self, start: usize, len: usize) -> AudioBuffer {
        let samples = self
            .samples
            .iter()
            .map(|c| (start..start + len).map(|i| c.get(i).copied().unwrap_or(0.0)).collect())
            .collect();
        AudioBuffer { samples, sample_rate: self.sample_rate }
    }

    /// Elementwise sum of equally shaped buffers.
    pub fn sum<'a>(buffers: impl IntoIterator<Item = &'a AudioBuffer>) -> Result<AudioBuffer> {
        let mut it = buffers.into_iter();
        let mut acc = it.next().ok_or_else(|| Error::config("buffers", "nothing to sum"))?.clone();
        for b in it {
            if b.channels() != acc.channels() || b.len() != acc.len() || b.sample_rate != acc.sample_rate {
                return Err(Error::config("buffers", "cannot sum buffers of different shape or rate"));
            }
            for (a, s) in acc.samples.iter_mut().zip(&b.samples) {
                a.iter_mut().zip(s).for_each(|(x, y)| *x += y);
            }
        }
        Ok(acc)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().flatten().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    /// 4096-point frames with a 1024-sample hop (≈ 23.2 ms at 44.1 kHz).
    fn default() -> Self {
        Self { fft_size: 4096, hop: 1024 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_multiple_of(2) {
            return Err(Error::config("stft.fft_size", format!("must be even and >= 2, got {}", self.fft_size)));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::config("stft.hop", format!("must be in 1..={}, got {}", self.fft_size, self.hop)));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn left_pad(&self) -> usize {
        self.fft_size - self.hop
    }

    /// Padded length: left pad + signal + right pad ≥ `fft_size − hop`,
    /// rounded so that `(padded − fft_size)` is a multiple of the hop.
    fn padded_len(&self, len: usize) -> usize {
        let min = len + 2 * self.left_pad();
        let span = min.saturating_sub(self.fft_size);
        self.fft_size + span.div_ceil(self.hop) * self.hop
    }

    /// Frame count for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        (self.padded_len(len) - self.fft_size) / self.hop + 1
    }
}

/// `F × T × (2·channels)` real tensor; features ordered
/// `[ch0.re, ch0.im, ch1.re, ch1.im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Tensor,
    length: usize,
}

impl ComplexSpectrogram {
    pub fn new(data: Tensor, length: usize) -> Result<Self> {
        match *data.shape() {
            [_, _, feat] if feat % 2 == 0 && feat > 0 => Ok(Self { data, length }),
            ref s => Err(Error::shape("ComplexSpectrogram", format!("expected [F, T, even], got {s:?}"))),
        }
    }

    pub fn bins(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn features(&self) -> usize {
        self.data.shape()[2]
    }

    /// Waveform length the spectrogram was computed from.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn scaled_add(&self, a: f64, other: &ComplexSpectrogram, b: f64) -> Result<ComplexSpectrogram> {
        let data = self.data.zip_map(&other.data, |x, y| a * x + b * y)?;
        Ok(ComplexSpectrogram { data, length: self.length })
    }
}

/// Forward transform; mono input is duplicated to stereo first.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    let audio = audio.to_stereo();
    let (n, hop, len) = (cfg.fft_size, cfg.hop, audio.len());
    let bins = cfg.bins();
    let frames = cfg.frames(len);
    let padded = cfg.padded_len(len);
    let pad = cfg.left_pad();
    let feat = 2 * audio.channels();
    let fft = fft_forward(n);
    let mut data = vec![0.0; bins * frames * feat];
    let mut buf = vec![Complex64::new(0.0, 0.0); n * frames];
    for ch in 0..audio.channels() {
        let mut padded_sig = vec![0.0; padded];
        padded_sig[pad..pad + len].copy_from_slice(audio.channel(ch));
        for (t, frame) in buf.chunks_exact_mut(n).enumerate() {
            for (z, &v) in frame.iter_mut().zip(&padded_sig[t * hop..t * hop + n]) {
                *z = Complex64::new(v, 0.0);
            }
        }
        fft.process(&mut buf);
        for (t, frame) in buf.chunks_exact(n).enumerate() {
            for (f, z) in frame.iter().take(bins).enumerate() {
                let at = (f * frames + t) * feat + 2 * ch;
                data[at] = z.re;
                data[at + 1] = z.im;
            }
        }
    }
    ComplexSpectrogram::new(Tensor::new(&[bins, frames, feat], data)?, len)
}

/// Inverse transform by overlap-add, cropped or zero-padded to `length`.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig, length: usize, sample_rate: u32) -> Result<AudioBuffer> {
    cfg.validate()?;
    if spec.bins() != cfg.bins() {
        return Err(Error::config(
            "stft.fft_size",
            format!("spectrogram has {} bins, config implies {}", spec.bins(), cfg.bins()),
        ));
    }
    let (n, hop) = (cfg.fft_size, cfg.hop);
    let (bins, frames, feat) = (spec.bins(), spec.frames(), spec.features());
    let total = (frames - 1) * hop + n;
    let pad = cfg.left_pad();
    let ifft = fft_inverse(n);
    let mut counts = vec![0.0; total];
    for t in 0..frames {
        counts[t * hop..t * hop + n].iter_mut().for_each(|c| *c += 1.0);
    }
    let data = spec.tensor().data();
    let mut channels = Vec::with_capacity(feat / 2);
    let mut buf = vec![Complex64::new(0.0, 0.0); n * frames];
    for ch in 0..feat / 2 {
        for (t, frame) in buf.chunks_exact_mut(n).enumerate() {
            frame.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for f in 0..bins {
                let at = (f * frames + t) * feat + 2 * ch;
                let self_conjugate = f == 0 || f == n / 2;
                let z = Complex64::new(data[at], if self_conjugate { 0.0 } else { data[at + 1] });
                frame[f] = z;
                if !self_conjugate {
                    frame[n - f] = z.conj();
                }
            }
        }
        ifft.process(&mut buf);
        let mut acc = vec![0.0; total];
        for (t, frame) in buf.chunks_exact(n).enumerate() {
            for (a, z) in acc[t * hop..t * hop + n].iter_mut().zip(frame) {
                *a += z.re / n as f64;
            }
        }
        let out: Vec<f64> = (0..length)
            .map(|i| {
                let j = i + pad;
                if j < total && counts[j] > 0.0 {
                    acc[j] / counts[j]
                } else {
                    0.0
                }
            })
            .collect();
        channels.push(out);
    }
    AudioBuffer::new(channels, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn noise(channels: usize, len: usize, seed: u64) -> AudioBuffer {
        let mut r = RngState::new(seed);
        AudioBuffer::new((0..channels).map(|_| (0..len).map(|_| r.uniform(-1.0, 1.0)).collect()).collect(), 44_100)
            .unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = StftConfig { fft_size: 64, hop: 16 };
        let a = AudioBuffer::silence(2, 300, 8000).unwrap();
        let s = stft(&a, &cfg).unwrap();
        assert!(s.tensor().data().iter().all(|&v| v == 0.0));
        let back = istft(&s, &cfg, 300, 8000).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn default_bins() {
        let s = stft(&noise(2, 44_100, 1), &StftConfig::default()).unwrap();
        assert_eq!(s.bins(), 2049);
        assert_eq!(s.features(), 4);
    }

    #[test]
    fn mono_is_duplicated() {
        let cfg = StftConfig { fft_size: 32, hop: 8 };
        let s = stft(&noise(1, 100, 2), &cfg).unwrap();
        assert_eq!(s.features(), 4);
        for row in s.tensor().data().chunks(4) {
            assert_eq!(row[..2], row[2..]);
        }
    }

    #[test]
    fn short_signal_round_trips() {
        let cfg = StftConfig { fft_size: 64, hop: 16 };
        let a = noise(2, 5, 3);
        let back = istft(&stft(&a, &cfg).unwrap(), &cfg, 5, 44_100).unwrap();
        for ch in 0..2 {
            for (x, y) in a.channel(ch).iter().zip(back.channel(ch)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_config_rejected() {
        let s = stft(&noise(2, 100, 4), &StftConfig { fft_size: 32, hop: 8 }).unwrap();
        let err = istft(&s, &StftConfig { fft_size: 64, hop: 16 }, 100, 44_100).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
