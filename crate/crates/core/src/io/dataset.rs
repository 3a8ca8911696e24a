//! Stem dataset on disk: `root/<track>/mixture.wav` plus `<source>.wav` for
//! every source, all sharing length and sample rate.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::training::StemSet;

use super::wav::{read_wav, write_wav, WavFormat};

pub const MIXTURE_FILE: &str = "mixture.wav";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub sources: Vec<String>,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>, sources: &[String]) -> Self {
        Self { root: root.into(), sources: sources.to_vec() }
    }

    /// Track directory names, sorted.
    pub fn tracks(&self) -> Result<Vec<String>> {
        let entries = fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            if entry.path().join(MIXTURE_FILE).is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(Error::config("data", format!("no track folders with {MIXTURE_FILE} under {}", self.root.display())));
        }
        Ok(names)
    }

    pub fn stem_path(&self, track: &str, source: &str) -> PathBuf {
        self.root.join(track).join(format!("{source}.wav"))
    }

    pub fn load_track(&self, track: &str) -> Result<StemSet> {
        let dir = self.root.join(track);
        let mixture = read_wav(&dir.join(MIXTURE_FILE))?;
        let stems = self
            .sources
            .iter()
            .map(|s| {
                let a = read_wav(&self.stem_path(track, s))?;
                if a.len() != mixture.len() || a.sample_rate() != mixture.sample_rate() {
                    return Err(Error::config(
                        "data",
                        format!("{track}/{s}.wav: {} samples @ {} Hz, mixture has {} @ {} Hz", a.len(), a.sample_rate(), mixture.len(), mixture.sample_rate()),
                    ));
                }
                Ok(if a.channels() == mixture.channels() { a } else { a.to_stereo() })
            })
            .collect::<Result<Vec<_>>>()?;
        let mixture = if stems.first().is_some_and(|s| s.channels() != mixture.channels()) { mixture.to_stereo() } else { mixture };
        StemSet::with_mixture(self.sources.clone(), stems, mixture)
    }

    pub fn load_all(&self) -> Result<Vec<(String, StemSet)>> {
        self.tracks()?.into_iter().map(|t| Ok((t.clone(), self.load_track(&t)?))).collect()
    }

    pub fn write_track(&self, track: &str, set: &StemSet, format: WavFormat) -> Result<()> {
        let dir = self.root.join(track);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_wav(&dir.join(MIXTURE_FILE), set.mixture(), format)?;
        for (name, stem) in set.names().iter().zip(set.stems()) {
            write_wav(&self.stem_path(track, name), stem, format)?;
        }
        Ok(())
    }
}

/// Reads `<dir>/<source>.wav` for each source.
pub fn read_source_dir(dir: &Path, sources: &[String]) -> Result<Vec<crate::spectral::AudioBuffer>> {
    sources.iter().map(|s| read_wav(&dir.join(format!("{s}.wav")))).collect()
}
