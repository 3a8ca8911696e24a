use crate::error::{Error, Result};
use crate::model::{batch, Model, SOURCE_FEATURES};
use crate::numerics::{Graph, Tensor};
use crate::rng::RngState;
use crate::spectral::stft;

use super::adam::Adam;
use super::checkpoint::Checkpoint;
use super::data::{augment_remix, augment_scale, segment, StemSet, TrainConfig};

/// Stacks each source's `[F, T, 4]` spectrogram into `[F, T, 4·S]`.
fn interleave_sources(specs: &[Tensor]) -> Result<Tensor> {
    let first = &specs[0];
    let [f, t, c] = first.shape() else {
        return Err(Error::shape("interleave_sources", format!("{:?}", first.shape())));
    };
    let s = specs.len();
    let mut data = vec![0.0; f * t * c * s];
    for (k, spec) in specs.iter().enumerate() {
        for (cell, src) in data.chunks_exact_mut(c * s).zip(spec.data().chunks_exact(*c)) {
            cell[k * c..(k + 1) * c].copy_from_slice(src);
        }
    }
    Tensor::new(&[*f, *t, c * s], data)
}

/// Spectrogram input and target for one example, sources in model order.
pub fn example_tensors(model: &Model, set: &StemSet) -> Result<(Tensor, Tensor)> {
    let stft_cfg = &model.cfg.stft;
    let set = set.reordered(model.sources())?;
    let x = stft(set.mixture(), stft_cfg)?.into_tensor();
    let specs = set.stems().iter().map(|s| Ok(stft(s, stft_cfg)?.into_tensor())).collect::<Result<Vec<_>>>()?;
    debug_assert!(specs.iter().all(|s| s.shape()[2] == SOURCE_FEATURES));
    Ok((x, interleave_sources(&specs)?))
}

/// Loss of `model` on a batch of examples without touching gradients.
pub fn evaluate_loss(model: &Model, sets: &[StemSet]) -> Result<f64> {
    let (x, y) = batch_tensors(model, sets)?;
    let mut g = Graph::inference();
    let xv = g.constant(x);
    let out = model.forward(&mut g, xv)?;
    super::loss::rmse_loss(g.value(out), &y)
}

fn batch_tensors(model: &Model, sets: &[StemSet]) -> Result<(Tensor, Tensor)> {
    let pairs = sets.iter().map(|s| example_tensors(model, s)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<&Tensor> = pairs.iter().map(|p| &p.0).collect();
    let ys: Vec<&Tensor> = pairs.iter().map(|p| &p.1).collect();
    Ok((batch(&xs)?, batch(&ys)?))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub losses: Vec<f64>,
}

impl TrainLog {
    pub fn initial(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Stateful training loop over a fixed pool of segments.
pub struct Trainer {
    pub model: Model,
    pub adam: Adam,
    pub cfg: TrainConfig,
    rng: RngState,
    pool: Vec<(usize, usize, usize)>,
    step: usize,
}

impl Trainer {
    pub fn new(model: Model, tracks: &[StemSet], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if tracks.is_empty() {
            return Err(Error::config("data", "no training tracks"));
        }
        let rate = model.cfg.sample_rate;
        let mut pool = Vec::new();
        for (i, t) in tracks.iter().enumerate() {
            if t.sample_rate() != rate {
                return Err(Error::config("sample_rate", format!("track {i} is {} Hz, model is {rate} Hz", t.sample_rate())));
            }
            pool.extend(segment(t.len(), rate, &cfg).into_iter().map(|(s, e)| (i, s, e)));
        }
        let adam = Adam::new(&model.params);
        let rng = RngState::new(cfg.seed);
        Ok(Self { model, adam, cfg, rng, pool, step: 0 })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    fn draw_batch(&mut self, tracks: &[StemSet]) -> Vec<StemSet> {
        let mut out: Vec<StemSet> = (0..self.cfg.batch_size)
            .map(|_| {
                let (i, s, e) = self.pool[self.rng.below(self.pool.len() as u64) as usize];
                tracks[i].slice(s, e)
            })
            .collect();
        if self.cfg.remix {
            augment_remix(&mut out, &mut self.rng);
        }
        augment_scale(&mut out, &mut self.rng, self.cfg.scale_range);
        out
    }

    /// One optimization step; returns the loss before the update.
    pub fn step(&mut self, tracks: &[StemSet]) -> Result<f64> {
        let step = self.step;
        let wrap = |e: Error| match e {
            Error::NonFinite { op } => Error::Training { step, detail: format!("non-finite value in {op}") },
            other => other,
        };
        let sets = self.draw_batch(tracks);
        let (x, y) = batch_tensors(&self.model, &sets)?;
        let grads = {
            let mut g = Graph::new();
            let xv = g.constant(x);
            let yv = g.constant(y);
            let out = self.model.forward(&mut g, xv).map_err(wrap)?;
            let loss = g.rmse_loss(out, yv).map_err(wrap)?;
            let value = g.value(loss).data()[0];
            (g.backward(loss).map_err(wrap)?, value)
        };
        let (grads, loss) = grads;
        if !loss.is_finite() {
            return Err(Error::Training { step, detail: format!("loss is {loss}") });
        }
        self.model.params.accumulate(&grads);
        drop(grads);
        self.adam.step(&mut self.model.params, self.cfg.lr)?;
        self.step += 1;
        Ok(loss)
    }

    /// Runs `cfg.steps` steps, calling `on_step(step, loss, self)` after each.
    pub fn run(
        &mut self,
        tracks: &[StemSet],
        mut on_step: impl FnMut(usize, f64, &Trainer) -> Result<()>,
    ) -> Result<TrainLog> {
        let mut log = TrainLog::default();
        while self.step < self.cfg.steps {
            let loss = self.step(tracks)?;
            log.losses.push(loss);
            log::debug!("step {} loss {loss:.6}", self.step);
            on_step(self.step, loss, self)?;
        }
        Ok(log)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            train: Some(self.cfg.clone()),
            seed: self.cfg.seed,
            step: self.step as u64,
            optimizer: Some(self.adam.clone()),
        }
    }
}

/// Trains `model` in place for `cfg.steps` steps and returns the loss curve.
pub fn fit_toy(model: &mut Model, tracks: &[StemSet], cfg: &TrainConfig) -> Result<TrainLog> {
    let mut trainer = Trainer::new(model.clone(), tracks, cfg.clone())?;
    let log = trainer.run(tracks, |_, _, _| Ok(()))?;
    *model = trainer.model;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::spectral::AudioBuffer;

    fn toy_set(cfg: &ModelConfig, len: usize) -> StemSet {
        let mut rng = RngState::new(4);
        let stems = cfg
            .sources
            .iter()
            .map(|_| AudioBuffer::new(vec![(0..len).map(|_| 0.1 * rng.normal()).collect()], cfg.sample_rate).unwrap())
            .collect();
        StemSet::from_stems(cfg.sources.clone(), stems).unwrap()
    }

    fn quick_cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            segment_seconds: 0.05,
            segment_hop_seconds: 0.05,
            lr,
            batch_size: 1,
            steps: 3,
            scale_range: [1.0, 1.0],
            remix: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_loss() {
        let cfg = ModelConfig::tiny();
        let set = toy_set(&cfg, 400);
        let mut model = Model::new(cfg, 1).unwrap();
        let log = fit_toy(&mut model, &[set], &quick_cfg(0.0)).unwrap();
        assert_eq!(log.losses.len(), 3);
        assert!(log.losses.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = ModelConfig::tiny();
        let set = toy_set(&cfg, 800);
        let tc = TrainConfig { batch_size: 2, remix: true, scale_range: [0.5, 1.5], ..quick_cfg(1e-3) };
        let run = || {
            let mut m = Model::new(cfg.clone(), 2).unwrap();
            let log = fit_toy(&mut m, std::slice::from_ref(&set), &tc).unwrap();
            (log, m.params.get(m.params.ids().next().unwrap()).data().to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn interleave_layout() {
        let a = Tensor::from_fn(&[1, 2, 4], |i| i as f64);
        let b = Tensor::from_fn(&[1, 2, 4], |i| 100.0 + i as f64);
        let y = interleave_sources(&[a, b]).unwrap();
        assert_eq!(y.shape(), &[1, 2, 8]);
        assert_eq!(&y.data()[..8], &[0.0, 1.0, 2.0, 3.0, 100.0, 101.0, 102.0, 103.0]);
    }
}
