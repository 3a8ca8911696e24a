//! Run configuration file (TOML).
//!
//! ```toml
//! [model]
//! sample_rate = 44100
//! channels = [32, 64, 128]
//! conv_modules = [3, 2, 1]
//! norm_groups = 4
//! fusion = "after_upsample"
//! sources = ["drums", "bass", "other", "vocals"]
//!
//! [model.stft]
//! fft_size = 4096
//! hop = 1024
//!
//! [model.band_split]
//! proportions = [0.175, 0.392, 0.433]
//! strides = [1, 4, 16]
//!
//! [model.dual_path]
//! layers = 6
//! hidden_odd = 128
//! hidden_even = 256
//! order = "time_first"
//!
//! [train]
//! segment_seconds = 11.0
//! segment_hop_seconds = 1.0
//! lr = 0.0005
//! batch_size = 4
//! steps = 1000
//! seed = 0
//! scale_range = [0.25, 1.25]
//! remix = true
//! checkpoint_every = 0
//! ```
//!
//! Every key is optional and defaults to the values above; unknown keys are
//! rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default();
            Error::config("config", format!("{}{span}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_idempotent() {
        for cfg in [RunConfig::default(), RunConfig { model: ModelConfig::tiny(), train: TrainConfig::default() }] {
            let text = cfg.to_toml().unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn doc_example_parses_to_defaults() {
        let doc = include_str!("config.rs");
        let body: String = doc
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n")
            .collect();
        assert_eq!(RunConfig::from_toml(&body).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_error() {
        let e = RunConfig::from_toml("[model]\nchanels = [8, 16]\n").unwrap_err().to_string();
        assert!(e.contains("chanels"), "{e}");
    }

    #[test]
    fn validation_names_field() {
        let e = RunConfig::from_toml("[model.dual_path]\nhidden_even = 100\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "dual_path.hidden_even"), "{e}");
        let e = RunConfig::from_toml("[train]\nlr = -1.0\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "train.lr"), "{e}");
    }
}
