use std::path::Path;
use std::process::{Command, Output};

use scnet::io::read_wav;

fn scnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scnet")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
[model]
sample_rate = 8000
channels = [8, 16, 32]
conv_modules = [1, 1, 1]
sources = ["bass", "drums", "vocals"]

[model.stft]
fft_size = 126
hop = 42

[model.dual_path]
layers = 2
hidden_odd = 4
hidden_even = 8

[train]
segment_seconds = 0.5
segment_hop_seconds = 0.5
batch_size = 1
steps = 3
"#;

#[test]
fn plan_bands_prints_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let out = scnet(
        &["plan-bands", "--freq-bins", "2049", "--proportions", "0.175,0.392,0.433", "--strides", "1,4,16", "--blocks", "3"],
        dir.path(),
    );
    let text = stdout(&out);
    assert!(text.contains("cascade: 2049 -> 615 -> 185 -> 56"), "{text}");
}

#[test]
fn param_count_breakdown_adds_up() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&scnet(&["param-count"], dir.path()));
    let get = |k: &str| -> usize {
        let line = text.lines().find(|l| l.starts_with(&format!("{k}\t"))).unwrap();
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(get("encoder") + get("separator") + get("decoder"), get("total"));
}

#[test]
fn fixtures_train_separate_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), TINY).unwrap();
    stdout(&scnet(&["make-fixtures", "--out", "data", "--seed", "1", "--config", "tiny.toml", "--seconds", "1.5"], d));
    stdout(&scnet(&["train", "--config", "tiny.toml", "--data", "data", "--out", "m.ckpt"], d));
    stdout(&scnet(&["separate", "--ckpt", "m.ckpt", "--input", "data/mixed/mixture.wav", "--out-dir", "est"], d));
    let mix = read_wav(&d.join("data/mixed/mixture.wav")).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(d.join("est")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 3);
    for f in &files {
        assert_eq!(read_wav(f).unwrap().len(), mix.len());
    }
    let report = stdout(&scnet(&["eval-sdr", "--ref-dir", "data/mixed", "--est-dir", "est"], d));
    assert_eq!(report.lines().filter(|l| l.starts_with("sdr\t")).count(), 3, "{report}");
    let rtf = stdout(&scnet(&["bench-rtf", "--ckpt", "m.ckpt", "--seconds", "0.5", "--reps", "3"], d));
    assert!(rtf.lines().any(|l| l.starts_with("rtf\t")));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let unknown = scnet(&["frobnicate"], d);
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    std::fs::write(d.join("bad.toml"), "[model.dual_path]\nhidden_even = 7\n").unwrap();
    let bad = scnet(&["param-count", "--config", "bad.toml"], d);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("dual_path.hidden_even"));

    let missing = scnet(&["eval-sdr", "--ref-dir", ".", "--est-dir", "."], d);
    assert!(!missing.status.success());
    let no_ckpt = scnet(&["separate", "--ckpt", "none.ckpt", "--input", "x.wav", "--out-dir", "o"], d);
    assert!(!no_ckpt.status.success());
}
