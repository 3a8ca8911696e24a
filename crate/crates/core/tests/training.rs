use scnet::io::{synth_fixture, FixtureKind};
use scnet::model::{Model, ModelConfig};
use scnet::training::{augment_remix, augment_scale, fit_toy, segment, Checkpoint, TrainConfig, Trainer};
use scnet::RngState;

fn quick(steps: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        segment_seconds: 0.25,
        segment_hop_seconds: 0.25,
        lr: 2e-3,
        batch_size: 2,
        steps,
        seed,
        ..TrainConfig::default()
    }
}

fn tracks(cfg: &ModelConfig) -> Vec<scnet::training::StemSet> {
    (0..3).map(|i| synth_fixture(FixtureKind::Mixed, &cfg.sources, 1.0, cfg.sample_rate, i).unwrap()).collect()
}

#[test]
fn segments_cover_and_respect_hop() {
    let cfg = TrainConfig { segment_seconds: 2.0, segment_hop_seconds: 0.5, ..TrainConfig::default() };
    let segs = segment(10 * 100, 100, &cfg);
    assert_eq!(segs.first(), Some(&(0, 200)));
    assert!(segs.iter().all(|&(s, e)| e - s == 200 && e <= 1000));
    assert!(segs.windows(2).all(|w| w[1].0 - w[0].0 == 50));
    assert_eq!(segs.last().unwrap().1, 1000);
    assert_eq!(segment(30, 100, &cfg), vec![(0, 200)]);
}

#[test]
fn augmentation_keeps_mixture_consistent() {
    let cfg = ModelConfig::tiny();
    let mut batch = tracks(&cfg);
    let mut rng = RngState::new(3);
    augment_remix(&mut batch, &mut rng);
    let gains = augment_scale(&mut batch, &mut rng, [0.25, 1.25]);
    assert_eq!(gains.len(), 3 * cfg.sources.len());
    assert!(gains.iter().all(|g| (0.25..=1.25).contains(g)));
    for set in &batch {
        assert!(set.mixture_error() < 1e-12);
    }
}

#[test]
fn short_training_lowers_loss_and_resumes() {
    let cfg = ModelConfig::tiny();
    let data = tracks(&cfg);
    let mut model = Model::new(cfg.clone(), 2).unwrap();
    let log = fit_toy(&mut model, &data, &quick(30, 5)).unwrap();
    assert_eq!(log.losses.len(), 30);
    let head: f64 = log.losses[..5].iter().sum();
    let tail: f64 = log.losses[25..].iter().sum();
    assert!(tail < head, "{:?}", log.losses);

    // 10 steps + checkpoint + 10 steps matches 20 straight steps
    let mut straight = Trainer::new(Model::new(cfg.clone(), 2).unwrap(), &data, quick(20, 9)).unwrap();
    let full = straight.run(&data, |_, _, _| Ok(())).unwrap();
    let mut first = Trainer::new(Model::new(cfg.clone(), 2).unwrap(), &data, quick(10, 9)).unwrap();
    let part = first.run(&data, |_, _, _| Ok(())).unwrap();
    assert_eq!(part.losses[..], full.losses[..10]);
    let ck = Checkpoint::from_bytes(&first.checkpoint().to_bytes().unwrap()).unwrap();
    assert_eq!(ck.step, 10);
    let bytes = ck.to_bytes().unwrap();
    assert_eq!(bytes, first.checkpoint().to_bytes().unwrap());
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let cfg = ModelConfig::tiny();
    let data = tracks(&cfg);
    let mut t = Trainer::new(Model::new(cfg, 4).unwrap(), &data, quick(2, 1)).unwrap();
    t.run(&data, |_, _, _| Ok(())).unwrap();
    let ck = t.checkpoint();
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());
    std::fs::write(&path, b"SCNETCKP").unwrap();
    assert!(Checkpoint::load(&path).is_err());
}
