use std::fs;
use std::path::Path;

use scnet::bandplan::{cascade, BandSplitSpec};
use scnet::io::{
    read_wav, separate_long, synth_fixture, write_wav, DatasetLayout, FixtureKind, RunConfig, WavFormat, MIXTURE_FILE,
};
use scnet::metrics::{chunked_median_sdr, measure_rtf};
use scnet::model::{param_count as count, Model};
use scnet::training::{Checkpoint, Trainer};
use scnet::{Error, Result};

/// Published size of the reference configuration.
const REFERENCE_PARAMS: f64 = 10.08e6;

fn bad(field: &str, detail: impl Into<String>) -> Error {
    Error::Config { field: field.into(), detail: detail.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

pub fn plan_bands(freq_bins: usize, proportions: &[f64], strides: &[usize], blocks: usize) -> Result<()> {
    let p: [f64; 3] = proportions.try_into().map_err(|_| bad("proportions", "need exactly three values"))?;
    let s: [usize; 3] = strides.try_into().map_err(|_| bad("strides", "need exactly three values"))?;
    let spec = BandSplitSpec::new(p, s)?;
    print!("{}", cascade(freq_bins, &spec, blocks)?);
    println!();
    Ok(())
}

pub fn train(config: &Path, data: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let layout = DatasetLayout::new(data, &cfg.model.sources);
    let tracks: Vec<_> = layout.load_all()?.into_iter().map(|(_, set)| set).collect();
    let model = Model::new(cfg.model.clone(), cfg.train.seed)?;
    let every = cfg.train.checkpoint_every;
    let mut trainer = Trainer::new(model, &tracks, cfg.train.clone())?;
    println!("# step\tloss");
    trainer.run(&tracks, |step, loss, t| {
        println!("loss\t{step}\t{loss:e}");
        if every > 0 && step % every == 0 && step < t.cfg.steps {
            t.checkpoint().save(&out.with_extension(format!("step{step}")))?;
        }
        Ok(())
    })?;
    trainer.checkpoint().save(out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

pub fn separate(ckpt: &Path, input: &Path, out_dir: &Path) -> Result<()> {
    let model = Checkpoint::load(ckpt)?.model;
    let audio = read_wav(input)?;
    let outs = separate_long(&model, &audio)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (name, buf) in model.sources().iter().zip(&outs) {
        let path = out_dir.join(format!("{name}.wav"));
        write_wav(&path, buf, WavFormat::Float32)?;
        println!("{}", path.display());
    }
    Ok(())
}

/// `<name>.wav` files in `dir` except the mixture, sorted.
fn stem_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "wav") && path.file_name().is_some_and(|n| n != MIXTURE_FILE) {
            names.push(path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(bad("ref-dir", format!("no reference stems in {}", dir.display())));
    }
    Ok(names)
}

pub fn eval_sdr(ref_dir: &Path, est_dir: &Path, chunk_seconds: f64) -> Result<()> {
    if !(chunk_seconds > 0.0) {
        return Err(bad("chunk-seconds", "must be positive"));
    }
    let names = stem_names(ref_dir)?;
    let mut pairs = Vec::with_capacity(names.len());
    for n in &names {
        let est_path = est_dir.join(format!("{n}.wav"));
        if !est_path.is_file() {
            return Err(bad("est-dir", format!("missing estimate {}", est_path.display())));
        }
        pairs.push((read_wav(&ref_dir.join(format!("{n}.wav")))?, read_wav(&est_path)?));
    }
    let triples: Vec<_> = names.iter().zip(&pairs).map(|(n, (r, e))| (n.as_str(), r, e)).collect();
    println!("{}", chunked_median_sdr(&triples, chunk_seconds)?);
    Ok(())
}

pub fn bench_rtf(ckpt: Option<&Path>, config: Option<&Path>, seconds: f64, reps: usize, warmup: usize) -> Result<()> {
    let model = match ckpt {
        Some(p) => Checkpoint::load(p)?.model,
        None => Model::new(load_config(config)?.model, 0)?,
    };
    println!("{}", measure_rtf(&model, seconds, reps, warmup)?);
    Ok(())
}

pub fn param_count(config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let c = count(&cfg.model)?;
    let total = c.total();
    println!("encoder\t{}", c.encoder);
    println!("separator\t{}", c.separator);
    println!("decoder\t{}", c.decoder);
    println!("total\t{total}");
    println!("reference\t{REFERENCE_PARAMS}");
    println!("deviation\t{:+.2}%", 100.0 * (total as f64 / REFERENCE_PARAMS - 1.0));
    Ok(())
}

pub fn make_fixtures(out: &Path, seed: u64, config: Option<&Path>, seconds: f64) -> Result<()> {
    let cfg = load_config(config)?.model;
    let layout = DatasetLayout::new(out, &cfg.sources);
    for (i, kind) in FixtureKind::ALL.into_iter().enumerate() {
        let set = synth_fixture(kind, &cfg.sources, seconds, cfg.sample_rate, seed.wrapping_add(i as u64))?;
        layout.write_track(kind.name(), &set, WavFormat::Float32)?;
        println!("{}", out.join(kind.name()).display());
    }
    Ok(())
}
