//! The separation network: encoder → dual-path separator → decoder.

mod config;
pub mod decoder;
pub mod encoder;
pub mod separator;

pub use config::{
    DualPathConfig, FusionPlacement, ModelConfig, PassOrder, INPUT_FEATURES, SOURCE_FEATURES,
};
pub use decoder::Decoder;
pub use encoder::Encoder;
pub use separator::Separator;

use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use crate::rng::RngState;
use crate::spectral::{istft, stft, AudioBuffer, ComplexSpectrogram};

/// Parameter totals per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub encoder: usize,
    pub separator: usize,
    pub decoder: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.encoder + self.separator + self.decoder
    }
}

/// Analytic parameter count; matches the number of scalars a freshly built
/// [`Model`] holds.
pub fn param_count(cfg: &ModelConfig) -> Result<ParamCount> {
    cfg.validate()?;
    Ok(ParamCount { encoder: Encoder::count(cfg), separator: Separator::count(cfg), decoder: Decoder::count(cfg) })
}

#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamStore,
    pub encoder: Encoder,
    pub separator: Separator,
    pub decoder: Decoder,
}

impl Model {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngState::new(seed);
        let mut params = ParamStore::new();
        let encoder = Encoder::init(&mut params, &cfg, &mut rng)?;
        let separator = Separator::init(&mut params, &cfg, &mut rng);
        let decoder = Decoder::init(&mut params, &cfg, &mut rng)?;
        Ok(Self { cfg, params, encoder, separator, decoder })
    }

    pub fn sources(&self) -> &[String] {
        &self.cfg.sources
    }

    /// `[B, F, T, 4]` spectrogram features → `[B, F, T, 4·S]`.
    pub fn forward(&self, g: &mut Graph, input: Var) -> Result<Var> {
        self.forward_with(g, &self.params, input)
    }

    /// [`Model::forward`] with parameter values taken from `store`, which
    /// must share this model's layout (e.g. a perturbed clone).
    pub fn forward_with(&self, g: &mut Graph, store: &ParamStore, input: Var) -> Result<Var> {
        let f = self.cfg.freq_bins();
        match g.shape(input) {
            [_, fi, t, INPUT_FEATURES] if *fi == f && *t >= 2 => {}
            s => {
                return Err(Error::shape(
                    "model",
                    format!("expected [B, {f}, T>=2, {INPUT_FEATURES}], got {s:?}"),
                ))
            }
        }
        let (latent, skips) = self.encoder.forward(g, store, input)?;
        let z = self.separator.forward(g, store, latent)?;
        self.decoder.forward(g, store, z, &skips)
    }

    /// Per-source spectrograms for one mixture spectrogram.
    pub fn separate_spectrogram(&self, mix: &ComplexSpectrogram) -> Result<Vec<ComplexSpectrogram>> {
        let mut g = Graph::inference();
        let t = mix.tensor();
        let mut shape = vec![1];
        shape.extend_from_slice(t.shape());
        let x = g.constant(t.clone().reshape(&shape)?);
        let out = self.forward(&mut g, x)?;
        let parts = self.decoder.split_sources(&mut g, out)?;
        parts
            .into_iter()
            .map(|p| {
                let v = g.value(p).clone().reshape(t.shape())?;
                ComplexSpectrogram::new(v, mix.length())
            })
            .collect()
    }

    /// Separates a waveform in one pass; output order follows `cfg.sources`.
    pub fn separate(&self, audio: &AudioBuffer) -> Result<Vec<AudioBuffer>> {
        if audio.sample_rate() != self.cfg.sample_rate {
            return Err(Error::config(
                "sample_rate",
                format!("model expects {} Hz, audio is {} Hz", self.cfg.sample_rate, audio.sample_rate()),
            ));
        }
        let spec = stft(audio, &self.cfg.stft)?;
        self.separate_spectrogram(&spec)?
            .iter()
            .map(|s| istft(s, &self.cfg.stft, audio.len(), audio.sample_rate()))
            .collect()
    }
}

/// Stacks per-item `[F, T, C]` tensors into `[B, F, T, C]`.
pub fn batch(items: &[&Tensor]) -> Result<Tensor> {
    let first = items.first().ok_or_else(|| Error::shape("batch", "empty batch"))?;
    let mut data = Vec::with_capacity(first.numel() * items.len());
    for t in items {
        if t.shape() != first.shape() {
            return Err(Error::shape("batch", format!("{:?} vs {:?}", t.shape(), first.shape())));
        }
        data.extend_from_slice(t.data());
    }
    let mut shape = vec![items.len()];
    shape.extend_from_slice(first.shape());
    Tensor::new(&shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_count_matches_store() {
        for cfg in [ModelConfig::tiny(), ModelConfig::default()] {
            let m = Model::new(cfg.clone(), 1).unwrap();
            assert_eq!(param_count(&cfg).unwrap().total(), m.params.numel());
        }
    }

    #[test]
    fn tiny_forward_shape() {
        let cfg = ModelConfig::tiny();
        let m = Model::new(cfg.clone(), 3).unwrap();
        let mut rng = RngState::new(9);
        let mut g = Graph::inference();
        let x = g.constant(Tensor::randn(&[2, 64, 6, 4], &mut rng));
        let y = m.forward(&mut g, x).unwrap();
        assert_eq!(g.shape(y), &[2, 64, 6, 8]);
        assert!(g.value(y).is_finite());
    }

    #[test]
    fn separate_keeps_length() {
        let cfg = ModelConfig::tiny();
        let m = Model::new(cfg, 3).unwrap();
        let mut rng = RngState::new(2);
        let a = AudioBuffer::new(vec![(0..1000).map(|_| rng.uniform(-0.5, 0.5)).collect()], 8000).unwrap();
        let out = m.separate(&a).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|o| o.len() == 1000 && o.channels() == 2));
    }

    #[test]
    fn wrong_bins_rejected() {
        let m = Model::new(ModelConfig::tiny(), 0).unwrap();
        let mut g = Graph::inference();
        let x = g.constant(Tensor::zeros(&[1, 60, 4, 4]));
        assert!(matches!(m.forward(&mut g, x), Err(Error::Shape { .. })));
    }
}
