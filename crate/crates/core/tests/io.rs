use scnet::io::{
    read_wav, separate_long, stitch_windows, synth_fixture, write_wav, DatasetLayout, FixtureKind, RunConfig,
    WavFormat,
};
use scnet::model::{Model, ModelConfig};
use scnet::spectral::AudioBuffer;
use scnet::RngState;

#[test]
fn stitched_passthrough_any_length() {
    let mut rng = RngState::new(1);
    for _ in 0..20 {
        let len = 1 + rng.below(400) as usize;
        let window = 1 + rng.below(90) as usize;
        let a = AudioBuffer::new(vec![(0..len).map(|_| rng.normal()).collect(); 2], 100).unwrap();
        let out = stitch_windows(&a, window, |c| Ok(vec![c.clone(), c.scaled(-1.0)])).unwrap();
        assert_eq!(out.len(), 2);
        for (x, y) in out[0].channel(1).iter().zip(a.channel(1)) {
            assert!((x - y).abs() < 1e-12, "len {len} window {window}");
        }
        for (x, y) in out[1].channel(0).iter().zip(a.channel(0)) {
            assert!((x + y).abs() < 1e-12);
        }
    }
}

#[test]
fn separate_long_keeps_length() {
    let mut cfg = ModelConfig::tiny();
    cfg.sample_rate = 2_000;
    let m = Model::new(cfg, 3).unwrap();
    let mut rng = RngState::new(2);
    for len in [1_000, 22_000, 22_001, 40_321] {
        let a = AudioBuffer::new(vec![(0..len).map(|_| 0.1 * rng.normal()).collect(); 2], 2_000).unwrap();
        let outs = separate_long(&m, &a).unwrap();
        assert_eq!(outs.len(), 2);
        assert!(outs.iter().all(|o| o.len() == len && o.channels() == 2));
    }
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sources: Vec<String> = ["bass", "vocals"].map(String::from).to_vec();
    let layout = DatasetLayout::new(dir.path(), &sources);
    for (i, kind) in FixtureKind::ALL.iter().enumerate() {
        let set = synth_fixture(*kind, &sources, 0.5, 8_000, i as u64).unwrap();
        layout.write_track(kind.name(), &set, WavFormat::Float32).unwrap();
    }
    let all = layout.load_all().unwrap();
    assert_eq!(all.len(), 4);
    let again = synth_fixture(FixtureKind::ClickPattern, &sources, 0.5, 8_000, 2).unwrap();
    let (_, loaded) = all.iter().find(|(n, _)| n == "click-pattern").unwrap();
    for (x, y) in loaded.stem("vocals").unwrap().channel(0).iter().zip(again.stem("vocals").unwrap().channel(0)) {
        assert!((x - y).abs() < 1e-7);
    }
    assert!(loaded.mixture_error() < 1e-6);
}

#[test]
fn wav_file_round_trip_pcm16() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let a = AudioBuffer::new(vec![(0..300).map(|i| (i as f64 * 0.05).sin() * 0.8).collect(); 2], 16_000).unwrap();
    write_wav(&path, &a, WavFormat::Pcm16).unwrap();
    let b = read_wav(&path).unwrap();
    assert_eq!(b.sample_rate(), 16_000);
    for (x, y) in a.channel(0).iter().zip(b.channel(0)) {
        assert!((x - y).abs() <= 1.0 / 32_768.0);
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let cfg = RunConfig { model: ModelConfig::tiny(), ..RunConfig::default() };
    cfg.save(&path).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
    std::fs::write(&path, "[train]\nsteps = \"many\"\n").unwrap();
    assert!(RunConfig::load(&path).is_err());
}
