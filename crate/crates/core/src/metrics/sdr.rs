use std::fmt;

use crate::error::{Error, Result};
use crate::spectral::AudioBuffer;

/// Reported when the residual vanishes.
pub const SDR_CAP_DB: f64 = 100.0;
/// Reference energy at or below this counts as silence.
pub const SILENCE_ENERGY: f64 = 1e-12;

fn check(reference: &AudioBuffer, est: &AudioBuffer) -> Result<()> {
    if reference.channels() != est.channels() || reference.len() != est.len() {
        return Err(Error::Metric(format!(
            "reference is {}ch x {}, estimate is {}ch x {}",
            reference.channels(),
            reference.len(),
            est.channels(),
            est.len()
        )));
    }
    Ok(())
}

fn ratio_db(signal: f64, residual: f64) -> f64 {
    if residual <= 0.0 {
        return SDR_CAP_DB;
    }
    (10.0 * (signal / residual).log10()).min(SDR_CAP_DB)
}

fn energies(reference: &AudioBuffer, est: &AudioBuffer, start: usize, end: usize) -> (f64, f64) {
    let mut sig = 0.0;
    let mut res = 0.0;
    for (r, e) in reference.samples().iter().zip(est.samples()) {
        for (a, b) in r[start..end].iter().zip(&e[start..end]) {
            sig += a * a;
            res += (a - b) * (a - b);
        }
    }
    (sig, res)
}

/// `10·log10(Σ ref² / Σ (ref − est)²)`, capped at [`SDR_CAP_DB`].
pub fn sdr(reference: &AudioBuffer, est: &AudioBuffer) -> Result<f64> {
    check(reference, est)?;
    let (sig, res) = energies(reference, est, 0, reference.len());
    if sig <= SILENCE_ENERGY {
        return Err(Error::Metric("reference is silent".into()));
    }
    Ok(ratio_db(sig, res))
}

/// SDR of every non-overlapping chunk; silent chunks are `None`. A trailing
/// partial chunk is dropped.
pub fn chunk_sdrs(reference: &AudioBuffer, est: &AudioBuffer, chunk_seconds: f64) -> Result<Vec<Option<f64>>> {
    check(reference, est)?;
    let chunk = (chunk_seconds * reference.sample_rate() as f64).round() as usize;
    if chunk == 0 || reference.len() < chunk {
        return Err(Error::Metric(format!(
            "{} samples is shorter than one {chunk_seconds} s chunk",
            reference.len()
        )));
    }
    Ok((0..reference.len() / chunk)
        .map(|i| {
            let (sig, res) = energies(reference, est, i * chunk, (i + 1) * chunk);
            (sig > SILENCE_ENERGY).then(|| ratio_db(sig, res))
        })
        .collect())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSdr {
    pub source: String,
    /// Per-chunk values; silent chunks are `None`.
    pub chunks: Vec<Option<f64>>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrReport {
    pub chunk_seconds: f64,
    pub sources: Vec<SourceSdr>,
}

impl SdrReport {
    /// Mean over sources of the per-source medians.
    pub fn mean_of_medians(&self) -> f64 {
        self.sources.iter().map(|s| s.median).sum::<f64>() / self.sources.len() as f64
    }

    pub fn get(&self, source: &str) -> Option<&SourceSdr> {
        self.sources.iter().find(|s| s.source == source)
    }

    /// Tab-separated rows: `sdr  <source>  <median dB>  <scored chunks>`.
    pub fn rows(&self) -> Vec<String> {
        self.sources
            .iter()
            .map(|s| format!("sdr\t{}\t{:.4}\t{}", s.source, s.median, s.chunks.iter().flatten().count()))
            .collect()
    }
}

impl fmt::Display for SdrReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# simplified SDR: plain energy ratio, median over {} s chunks; not comparable to BSSEval v4 scores",
            self.chunk_seconds
        )?;
        for row in self.rows() {
            writeln!(f, "{row}")?;
        }
        write!(f, "mean\t{:.4}", self.mean_of_medians())
    }
}

/// Chunked median SDR for each `(source, reference, estimate)` triple.
pub fn chunked_median_sdr(
    tracks: &[(&str, &AudioBuffer, &AudioBuffer)],
    chunk_seconds: f64,
) -> Result<SdrReport> {
    if tracks.is_empty() {
        return Err(Error::Metric("no sources to score".into()));
    }
    let sources = tracks
        .iter()
        .map(|(name, r, e)| {
            let chunks = chunk_sdrs(r, e, chunk_seconds)?;
            let scored: Vec<f64> = chunks.iter().flatten().copied().collect();
            let median = median(&scored).ok_or_else(|| Error::Metric(format!("`{name}`: every chunk is silent")))?;
            Ok(SourceSdr { source: name.to_string(), chunks, median })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SdrReport { chunk_seconds, sources })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn noise(len: usize, seed: u64) -> AudioBuffer {
        let mut rng = RngState::new(seed);
        AudioBuffer::new(vec![(0..len).map(|_| rng.normal()).collect(); 2], 100).unwrap()
    }

    #[test]
    fn analytic_cases() {
        let r = noise(500, 1);
        assert_eq!(sdr(&r, &r).unwrap(), SDR_CAP_DB);
        assert!((sdr(&r, &r.scaled(0.5)).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-4);
        assert!(sdr(&r, &r.scaled(0.0)).unwrap().abs() < 1e-12);
        let silent = AudioBuffer::silence(2, 500, 100).unwrap();
        assert!(matches!(sdr(&silent, &r), Err(Error::Metric(_))));
    }

    #[test]
    fn chunks_drop_silence_and_tail() {
        let mut r = noise(350, 2);
        r.channel_mut(0)[100..200].iter_mut().for_each(|v| *v = 0.0);
        r.channel_mut(1)[100..200].iter_mut().for_each(|v| *v = 0.0);
        let c = chunk_sdrs(&r, &r.scaled(0.5), 1.0).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c[1].is_none());
        let rep = chunked_median_sdr(&[("x", &r, &r.scaled(0.5))], 1.0).unwrap();
        assert!((rep.sources[0].median - 6.0206).abs() < 1e-3);
        assert!(rep.to_string().starts_with("# simplified SDR"));
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
