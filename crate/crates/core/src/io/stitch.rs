//! Windowed inference for inputs of any length.
//!
//! The input is cut into fixed windows with 50% overlap (the last window is
//! zero-padded). Each window's outputs are weighted by a triangle that
//! peaks mid-window, and the weighted sum is divided by the summed weights,
//! so the weights form a partition of unity at every sample.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::AudioBuffer;

pub const INFERENCE_WINDOW_SECONDS: f64 = 11.0;

/// Window starts covering `len` samples.
pub fn window_starts(len: usize, window: usize) -> Vec<usize> {
    let hop = (window / 2).max(1);
    if len <= window {
        return vec![0];
    }
    let n = (len - window).div_ceil(hop) + 1;
    (0..n).map(|i| i * hop).collect()
}

/// Linear fade weight for position `i` of a window; never zero.
pub fn fade_weight(i: usize, window: usize) -> f64 {
    (i + 1).min(window - i) as f64
}

/// Summed fade weights at each of `len` samples.
pub fn weight_sum(len: usize, window: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for s in window_starts(len, window) {
        for (i, a) in acc[s..len.min(s + window)].iter_mut().enumerate() {
            *a += fade_weight(i, window);
        }
    }
    acc
}

/// Runs `process` on every window and cross-fades the per-source outputs.
pub fn stitch_windows<F>(audio: &AudioBuffer, window: usize, mut process: F) -> Result<Vec<AudioBuffer>>
where
    F: FnMut(&AudioBuffer) -> Result<Vec<AudioBuffer>>,
{
    if window == 0 {
        return Err(Error::config("window", "must be at least one sample"));
    }
    let len = audio.len();
    let norm = weight_sum(len, window);
    let mut acc: Vec<Vec<Vec<f64>>> = Vec::new();
    for s in window_starts(len, window) {
        let chunk = audio.segment(s, window);
        let outs = process(&chunk)?;
        if acc.is_empty() {
            acc = outs.iter().map(|o| vec![vec![0.0; len]; o.channels()]).collect();
        }
        if outs.len() != acc.len() {
            return Err(Error::shape("stitch_windows", format!("{} outputs, expected {}", outs.len(), acc.len())));
        }
        for (src, out) in acc.iter_mut().zip(&outs) {
            if out.len() != window || out.channels() != src.len() {
                return Err(Error::shape("stitch_windows", format!("window output {}ch x {}", out.channels(), out.len())));
            }
            for (dst, ch) in src.iter_mut().zip(out.samples()) {
                for (i, d) in dst[s..len.min(s + window)].iter_mut().enumerate() {
                    *d += fade_weight(i, window) * ch[i];
                }
            }
        }
    }
    acc.into_iter()
        .map(|chs| {
            let chs = chs.into_iter().map(|c| c.iter().zip(&norm).map(|(v, w)| v / w).collect()).collect();
            AudioBuffer::new(chs, audio.sample_rate())
        })
        .collect()
}

/// Separates audio of any length with 11 s windows.
pub fn separate_long(model: &Model, audio: &AudioBuffer) -> Result<Vec<AudioBuffer>> {
    let window = (INFERENCE_WINDOW_SECONDS * model.cfg.sample_rate as f64).round() as usize;
    stitch_windows(audio, window, |chunk| model.separate(chunk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_cover_input() {
        assert_eq!(window_starts(5, 10), vec![0]);
        assert_eq!(window_starts(10, 10), vec![0]);
        assert_eq!(window_starts(11, 10), vec![0, 5]);
        assert_eq!(window_starts(26, 10), vec![0, 5, 10, 15, 20]);
    }

    #[test]
    fn identical_windows_stitch_exactly() {
        let a = AudioBuffer::new(vec![vec![0.25; 37], vec![-0.5; 37]], 10).unwrap();
        let out = stitch_windows(&a, 8, |c| Ok(vec![AudioBuffer::new(vec![vec![0.25; c.len()], vec![-0.5; c.len()]], 10).unwrap()]))
            .unwrap();
        assert_eq!(out.len(), 1);
        for (x, y) in out[0].samples().iter().flatten().zip(a.samples().iter().flatten()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn passthrough_keeps_signal() {
        let a = AudioBuffer::new(vec![(0..53).map(|i| (i as f64 * 0.3).sin()).collect()], 10).unwrap();
        let out = stitch_windows(&a, 12, |c| Ok(vec![c.clone(), c.scaled(2.0)])).unwrap();
        assert_eq!(out[0].len(), 53);
        for (x, y) in out[0].channel(0).iter().zip(a.channel(0)) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in out[1].channel(0).iter().zip(a.channel(0)) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
    }
}
