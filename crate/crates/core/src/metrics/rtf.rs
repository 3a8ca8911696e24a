use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::RngState;
use crate::spectral::AudioBuffer;

use super::sdr::median;

#[derive(Debug, Clone, PartialEq)]
pub struct RtfReport {
    /// Median wall-clock seconds over the timed repetitions.
    pub processing_seconds: f64,
    pub audio_seconds: f64,
    pub rtf: f64,
    pub repetitions: usize,
    pub warmup: usize,
    /// Every timed repetition, in order.
    pub samples: Vec<f64>,
}

impl RtfReport {
    pub fn row(&self) -> String {
        format!(
            "rtf\t{:.6}\t{:.6}\t{:.3}\t{}\t{}",
            self.rtf, self.processing_seconds, self.audio_seconds, self.repetitions, self.warmup
        )
    }
}

impl fmt::Display for RtfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# single-threaded; median of {} runs after {} warm-up", self.repetitions, self.warmup)?;
        writeln!(f, "# rtf\tprocessing_s\taudio_s\treps\twarmup")?;
        write!(f, "{}", self.row())
    }
}

/// Times `model.separate` on `seconds` of stereo noise.
pub fn measure_rtf(model: &Model, seconds: f64, repetitions: usize, warmup: usize) -> Result<RtfReport> {
    if repetitions < 3 {
        return Err(Error::config("reps", format!("need at least 3 repetitions, got {repetitions}")));
    }
    if warmup < 1 {
        return Err(Error::config("warmup", "need at least one warm-up run"));
    }
    let rate = model.cfg.sample_rate;
    let len = (seconds * rate as f64).round() as usize;
    if len == 0 {
        return Err(Error::config("seconds", "must cover at least one sample"));
    }
    let mut rng = RngState::new(0x5eed);
    let samples: Vec<Vec<f64>> = (0..2).map(|_| (0..len).map(|_| 0.1 * rng.normal()).collect()).collect();
    let audio = AudioBuffer::new(samples, rate)?;
    for _ in 0..warmup {
        std::hint::black_box(model.separate(&audio)?);
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t0 = Instant::now();
        std::hint::black_box(model.separate(&audio)?);
        samples.push(t0.elapsed().as_secs_f64());
    }
    let processing_seconds = median(&samples).expect("repetitions >= 3");
    let audio_seconds = len as f64 / rate as f64;
    Ok(RtfReport {
        processing_seconds,
        audio_seconds,
        rtf: processing_seconds / audio_seconds,
        repetitions,
        warmup,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn rejects_too_few_reps() {
        let m = Model::new(ModelConfig::tiny(), 0).unwrap();
        assert!(measure_rtf(&m, 0.1, 2, 1).is_err());
        assert!(measure_rtf(&m, 0.1, 3, 0).is_err());
    }

    #[test]
    fn positive_rtf() {
        let m = Model::new(ModelConfig::tiny(), 0).unwrap();
        let r = measure_rtf(&m, 0.2, 3, 1).unwrap();
        assert!(r.rtf > 0.0);
        assert_eq!(r.samples.len(), 3);
    }
}
